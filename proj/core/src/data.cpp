#include "calps/data.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "calps/error.hpp"
#include "calps/numeric.hpp"

namespace calps {

Dataset::Dataset(Eigen::VectorXd treatment, Eigen::MatrixXd covariates,
                 std::vector<std::string> covariate_names, std::optional<Eigen::VectorXd> outcome)
    : treatment_(std::move(treatment)),
      covariates_(std::move(covariates)),
      names_(std::move(covariate_names)),
      outcome_(std::move(outcome)) {
  if (covariates_.rows() != treatment_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "covariate rows do not match treatment length");
  }
  if (static_cast<Index>(names_.size()) != covariates_.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "covariate names do not match column count");
  }
  if (outcome_ && outcome_->size() != treatment_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "outcome length does not match treatment length");
  }
  for (Index i = 0; i < treatment_.size(); ++i) {
    if (treatment_[i] != 0.0 && treatment_[i] != 1.0) {
      throw Error(ErrorCode::InvalidArgument,
                  "treatment entry " + std::to_string(i) + " is not 0 or 1");
    }
  }
  if (!covariates_.allFinite()) {
    throw Error(ErrorCode::NonFinite, "covariate matrix has non-finite entries");
  }
  std::set<std::string> seen;
  for (const auto& name : names_) {
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::DuplicateTerm, "duplicate covariate name '" + name + "'");
    }
  }
}

Index Dataset::column(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) {
    throw Error(ErrorCode::UnknownColumn, "unknown covariate column '" + name + "'");
  }
  return static_cast<Index>(it - names_.begin());
}

namespace {

std::string_view op_name(UnaryOp op) {
  switch (op) {
    case UnaryOp::Square: return "square";
    case UnaryOp::Cube: return "cube";
    case UnaryOp::Log: return "log";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Sqrt: return "sqrt";
  }
  return "?";
}

double apply_op(UnaryOp op, double x) {
  switch (op) {
    case UnaryOp::Square: return x * x;
    case UnaryOp::Cube: return x * x * x;
    case UnaryOp::Log: return std::log(x);
    case UnaryOp::Exp: return std::exp(x);
    case UnaryOp::Sqrt: return std::sqrt(x);
  }
  return x;
}

// Interactions are unordered, so a:b and b:a share a key.
std::string term_key(const Term& term) {
  if (const auto* inter = std::get_if<Interaction>(&term)) {
    auto [a, b] = std::minmax(inter->left, inter->right);
    return a + ":" + b;
  }
  return term_name(term);
}

}  // namespace

std::string term_name(const Term& term) {
  return std::visit(
      [](const auto& t) -> std::string {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, MainEffect>) {
          return t.column;
        } else if constexpr (std::is_same_v<T, Interaction>) {
          return t.left + ":" + t.right;
        } else {
          return std::string(op_name(t.op)) + "(" + t.column + ")";
        }
      },
      term);
}

DesignSpec DesignSpec::main_effects(const std::vector<std::string>& columns, bool standardize) {
  DesignSpec spec;
  spec.standardize = standardize;
  for (const auto& c : columns) spec.terms.push_back(MainEffect{c});
  return spec;
}

DesignSpec DesignSpec::main_and_pairwise(const std::vector<std::string>& columns,
                                         bool standardize) {
  DesignSpec spec = main_effects(columns, standardize);
  for (std::size_t i = 0; i < columns.size(); ++i) {
    for (std::size_t j = i + 1; j < columns.size(); ++j) {
      spec.terms.push_back(Interaction{columns[i], columns[j]});
    }
  }
  return spec;
}

namespace {

struct ColumnStats {
  double mean;
  double sd;
};

ColumnStats sample_stats(const Eigen::VectorXd& x) {
  const double mean = pairwise_mean(x);
  Eigen::VectorXd dev2 = (x.array() - mean).square().matrix();
  const double var = pairwise_sum(dev2) / static_cast<double>(x.size() - 1);
  return {mean, std::sqrt(var)};
}

}  // namespace

DesignMatrix DesignMatrix::from_features(const Eigen::MatrixXd& features,
                                         std::vector<std::string> feature_names,
                                         bool standardize) {
  if (static_cast<Index>(feature_names.size()) != features.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "feature names do not match column count");
  }
  if (!features.allFinite()) {
    throw Error(ErrorCode::NonFinite, "feature matrix has non-finite entries");
  }
  const Index n = features.rows();
  const Index p = features.cols();
  if (standardize && n < 2 && p > 0) {
    throw Error(ErrorCode::InvalidArgument, "standardization needs at least two rows");
  }
  DesignMatrix d;
  d.values_.resize(n, p + 1);
  d.values_.col(0).setOnes();
  d.center_ = Eigen::VectorXd::Zero(p);
  d.scale_ = Eigen::VectorXd::Ones(p);
  d.standardized_ = standardize;
  d.names_.reserve(static_cast<std::size_t>(p + 1));
  d.names_.emplace_back("(Intercept)");
  for (Index j = 0; j < p; ++j) {
    Eigen::VectorXd col = features.col(j);
    if (standardize) {
      const auto [mean, sd] = sample_stats(col);
      if (!(sd > 0.0)) {
        throw Error(ErrorCode::ZeroVariance,
                    "feature '" + feature_names[static_cast<std::size_t>(j)] + "' has zero variance");
      }
      d.center_[j] = mean;
      d.scale_[j] = sd;
      col = (col.array() - mean) / sd;
    }
    d.values_.col(j + 1) = col;
    d.names_.push_back(std::move(feature_names[static_cast<std::size_t>(j)]));
  }
  return d;
}

Eigen::MatrixXd DesignMatrix::unstandardized() const {
  const Index p = num_features();
  Eigen::MatrixXd raw(rows(), p);
  for (Index j = 0; j < p; ++j) {
    raw.col(j) = (values_.col(j + 1).array() * scale_[j] + center_[j]).matrix();
  }
  return raw;
}

DesignMatrix DesignMatrix::subset_rows(std::span<const Index> rows) const {
  DesignMatrix d;
  d.values_.resize(static_cast<Index>(rows.size()), values_.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    d.values_.row(static_cast<Index>(k)) = values_.row(rows[k]);
  }
  d.names_ = names_;
  d.center_ = center_;
  d.scale_ = scale_;
  d.standardized_ = standardized_;
  d.dropped_ = dropped_;
  return d;
}

DesignMatrix build_design(const Dataset& dataset, const DesignSpec& spec) {
  if (spec.min_nonzero_count < 0) {
    throw Error(ErrorCode::InvalidArgument, "min_nonzero_count must be >= 0");
  }
  std::set<std::string> keys;
  for (const auto& term : spec.terms) {
    if (!keys.insert(term_key(term)).second) {
      throw Error(ErrorCode::DuplicateTerm, "duplicate design term '" + term_name(term) + "'");
    }
  }

  const Index n = dataset.n();
  const auto& x = dataset.covariates();
  std::vector<Eigen::VectorXd> kept;
  std::vector<std::string> kept_names;
  std::vector<std::string> dropped;

  for (const auto& term : spec.terms) {
    Eigen::VectorXd col = std::visit(
        [&](const auto& t) -> Eigen::VectorXd {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, MainEffect>) {
            return x.col(dataset.column(t.column));
          } else if constexpr (std::is_same_v<T, Interaction>) {
            return x.col(dataset.column(t.left)).cwiseProduct(x.col(dataset.column(t.right)));
          } else {
            const Index c = dataset.column(t.column);
            Eigen::VectorXd out(n);
            for (Index i = 0; i < n; ++i) out[i] = apply_op(t.op, x(i, c));
            return out;
          }
        },
        term);
    const std::string name = term_name(term);
    if (!col.allFinite()) {
      throw Error(ErrorCode::NonFinite, "design term '" + name + "' produced non-finite values");
    }
    const Index nonzero = (col.array() != 0.0).count();
    bool constant = n > 0 && (col.array() == col[0]).all();
    if (nonzero < spec.min_nonzero_count || (spec.standardize && constant)) {
      dropped.push_back(name);
      continue;
    }
    kept.push_back(std::move(col));
    kept_names.push_back(name);
  }

  if (kept.empty() && !spec.terms.empty()) {
    throw Error(ErrorCode::EmptyDesign, "every candidate design column was filtered out");
  }
  Eigen::MatrixXd features(n, static_cast<Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) features.col(static_cast<Index>(j)) = kept[j];

  DesignMatrix d = DesignMatrix::from_features(features, std::move(kept_names), spec.standardize);
  d.dropped_ = std::move(dropped);
  return d;
}

Coefficients Coefficients::zeros(Index size) {
  return from(Eigen::VectorXd::Zero(size));
}

Coefficients Coefficients::from(Eigen::VectorXd gamma) {
  Coefficients c;
  c.penalty_mask.assign(static_cast<std::size_t>(gamma.size()), true);
  if (!c.penalty_mask.empty()) c.penalty_mask[0] = false;
  c.gamma = std::move(gamma);
  return c;
}

double Coefficients::penalty_l1() const {
  double s = 0.0;
  for (Index j = 0; j < gamma.size(); ++j) {
    if (penalty_mask[static_cast<std::size_t>(j)]) s += std::abs(gamma[j]);
  }
  return s;
}

Index Coefficients::nonzero_count() const {
  Index k = 0;
  for (Index j = 0; j < gamma.size(); ++j) {
    if (penalty_mask[static_cast<std::size_t>(j)] && gamma[j] != 0.0) ++k;
  }
  return k;
}

Eigen::VectorXd linear_predictor(const DesignMatrix& design, const Coefficients& coef) {
  if (design.cols() != coef.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "design has " + std::to_string(design.cols()) + " columns but coefficients have " +
                    std::to_string(coef.size()));
  }
  return design.values() * coef.gamma;
}

double propensity(double g) noexcept {
  if (g >= 0.0) return 1.0 / (1.0 + std::exp(-g));
  const double e = std::exp(g);
  return e / (1.0 + e);
}

Eigen::VectorXd propensity(const Eigen::VectorXd& g) {
  Eigen::VectorXd pi(g.size());
  for (Index i = 0; i < g.size(); ++i) pi[i] = propensity(g[i]);
  return pi;
}

double logit(double pi) noexcept { return std::log(pi) - std::log1p(-pi); }

double treated_fraction(const Eigen::VectorXd& treatment) {
  if (treatment.size() == 0) {
    throw Error(ErrorCode::DegenerateTreatment, "empty treatment vector");
  }
  const double mean = pairwise_mean(treatment);
  if (!(mean > 0.0 && mean < 1.0)) {
    throw Error(ErrorCode::DegenerateTreatment, "treatment is constant; both arms are required");
  }
  return mean;
}

}  // namespace calps
