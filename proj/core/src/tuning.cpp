#include "calps/tuning.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "calps/error.hpp"
#include "calps/numeric.hpp"
#include "calps/rng.hpp"

namespace calps {

LambdaGrid LambdaGrid::make(double lambda0, int subdiv, int depth) {
  if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) {
    throw Error(ErrorCode::NoViableLambda, "lambda0 must be finite and positive");
  }
  if (subdiv < 1) throw Error(ErrorCode::InvalidArgument, "grid subdivision must be >= 1");
  if (depth < 0) throw Error(ErrorCode::InvalidArgument, "grid depth must be >= 0");
  LambdaGrid grid;
  grid.lambda0 = lambda0;
  grid.subdiv = subdiv;
  grid.depth = depth;
  for (int j = 0; j <= depth; ++j) {
    const double ratio = std::exp2(-static_cast<double>(j) / subdiv);
    grid.ratios.push_back(ratio);
    grid.values.push_back(j == 0 ? lambda0 : lambda0 * ratio);
  }
  return grid;
}

double lambda_max(LossKind kind, const DesignMatrix& design, const Eigen::VectorXd& treatment) {
  if (design.rows() != treatment.size()) {
    throw Error(ErrorCode::DimensionMismatch, "design rows and treatment length differ");
  }
  const double pi0 = treated_fraction(treatment);
  const Index n = treatment.size();
  Eigen::VectorXd r(n);
  for (Index i = 0; i < n; ++i) {
    const double t = treatment[i];
    const double r1 = t / pi0 - 1.0;
    const double r0 = (1.0 - t) / (1.0 - pi0) - 1.0;
    switch (kind) {
      case LossKind::ML: r[i] = t - pi0; break;
      case LossKind::CAL1: r[i] = r1; break;
      case LossKind::CAL0: r[i] = r0; break;
      case LossKind::BAL: r[i] = r1 - r0; break;
    }
  }
  const Eigen::MatrixXd& f = design.values();
  double best = 0.0;
  Eigen::VectorXd prod(n);
  for (Index j = 1; j < f.cols(); ++j) {
    prod = r.cwiseProduct(f.col(j));
    best = std::max(best, std::abs(pairwise_mean(prod)));
  }
  return best;
}

std::vector<int> fold_assignment(Index n, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 folds");
  if (n < folds) throw Error(ErrorCode::InvalidArgument, "fewer observations than folds");
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  PhiloxStream rng(seed, 0x464f4c44u);
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  std::vector<int> fold(static_cast<std::size_t>(n));
  for (Index pos = 0; pos < n; ++pos) {
    fold[static_cast<std::size_t>(perm[static_cast<std::size_t>(pos)])] = static_cast<int>(pos % folds);
  }
  return fold;
}

std::vector<FitResult> fit_path(LossKind kind, const DesignMatrix& design,
                                const Eigen::VectorXd& treatment, const LambdaGrid& grid,
                                const SolverConfig& config) {
  std::vector<FitResult> fits;
  fits.reserve(grid.values.size());
  std::optional<Coefficients> warm;
  for (double lambda : grid.values) {
    fits.push_back(fit_lasso(kind, design, treatment, lambda, config, warm));
    const FitResult& last = fits.back();
    if (last.coef.gamma.allFinite() && last.status != FitStatus::Separation) warm = last.coef;
  }
  return fits;
}

CvResult cross_validate(LossKind kind, const DesignMatrix& design, const Eigen::VectorXd& treatment,
                        const LambdaGrid& grid, int folds, std::uint64_t seed,
                        const SolverConfig& config) {
  if (grid.values.empty()) throw Error(ErrorCode::InvalidArgument, "lambda grid is empty");
  if (design.rows() != treatment.size()) {
    throw Error(ErrorCode::DimensionMismatch, "design rows and treatment length differ");
  }
  const Index n = design.rows();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  CvResult out;
  out.grid = grid;
  out.folds = folds;
  out.seed = seed;
  out.fold_assignment = fold_assignment(n, folds, seed);
  const std::size_t nl = grid.values.size();
  out.fold_values.assign(nl, std::vector<double>(static_cast<std::size_t>(folds), kInf));

  for (int k = 0; k < folds; ++k) {
    std::vector<Index> train;
    std::vector<Index> valid;
    for (Index i = 0; i < n; ++i) {
      (out.fold_assignment[static_cast<std::size_t>(i)] == k ? valid : train).push_back(i);
    }
    const DesignMatrix d_train = design.subset_rows(train);
    const DesignMatrix d_valid = design.subset_rows(valid);
    Eigen::VectorXd t_train(static_cast<Index>(train.size()));
    Eigen::VectorXd t_valid(static_cast<Index>(valid.size()));
    for (std::size_t i = 0; i < train.size(); ++i) t_train[static_cast<Index>(i)] = treatment[train[i]];
    for (std::size_t i = 0; i < valid.size(); ++i) t_valid[static_cast<Index>(i)] = treatment[valid[i]];

    std::optional<Coefficients> warm;
    for (std::size_t l = 0; l < nl; ++l) {
      try {
        const FitResult fit = fit_lasso(kind, d_train, t_train, grid.values[l], config, warm);
        if (fit.converged()) {
          out.fold_values[l][static_cast<std::size_t>(k)] =
              loss_value(kind, d_valid.values() * fit.coef.gamma, t_valid);
          warm = fit.coef;
        }
      } catch (const Error&) {
        // A degenerate training fold leaves this cell at +inf.
      }
    }
  }

  out.cv_values.assign(nl, kInf);
  int best = -1;
  for (std::size_t l = 0; l < nl; ++l) {
    double sum = 0.0;
    bool ok = true;
    for (double v : out.fold_values[l]) {
      if (!std::isfinite(v)) {
        ok = false;
        break;
      }
      sum += v;
    }
    if (!ok) continue;
    out.cv_values[l] = sum / folds;
    if (best < 0 || out.cv_values[l] < out.cv_values[static_cast<std::size_t>(best)]) {
      best = static_cast<int>(l);
    }
  }
  if (best < 0) throw Error(ErrorCode::NoViableLambda, "every lambda has a failed fold fit");
  out.selected_index = best;
  out.selected_lambda = grid.values[static_cast<std::size_t>(best)];
  return out;
}

}  // namespace calps
