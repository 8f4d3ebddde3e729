#include "calps/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "calps/error.hpp"
#include "calps/numeric.hpp"
#include "calps/wls_lasso.hpp"

namespace calps {

namespace {

constexpr int kSeparationPatience = 5;
constexpr double kArmijo = 1e-4;
constexpr double kMaxNewtonShift = 10.0;

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void check_inputs(const DesignMatrix& design, const Eigen::VectorXd& treatment) {
  if (design.rows() != treatment.size()) {
    throw Error(ErrorCode::DimensionMismatch, "design rows and treatment length differ");
  }
  if (design.rows() == 0) throw Error(ErrorCode::EmptyDesign, "design has no rows");
  for (Index i = 0; i < treatment.size(); ++i) {
    if (!(treatment[i] >= 0.0 && treatment[i] <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "treatment values must lie in [0, 1]");
    }
  }
}

Coefficients default_start(const Eigen::VectorXd& treatment, Index cols) {
  Coefficients c = Coefficients::zeros(cols);
  c.gamma[0] = logit(treated_fraction(treatment));
  return c;
}

double stationarity(const Eigen::VectorXd& grad, const Coefficients& coef, double lambda) {
  double worst = 0.0;
  for (Index j = 0; j < grad.size(); ++j) {
    double r;
    if (!coef.penalty_mask[static_cast<std::size_t>(j)]) {
      r = std::abs(grad[j]);
    } else if (coef.gamma[j] != 0.0) {
      r = std::abs(grad[j] + lambda * sign_of(coef.gamma[j]));
    } else {
      r = std::max(0.0, std::abs(grad[j]) - lambda);
    }
    worst = std::max(worst, r);
  }
  return worst;
}

double penalty_l1(const Eigen::VectorXd& gamma, const std::vector<bool>& mask) {
  double s = 0.0;
  for (Index j = 0; j < gamma.size(); ++j) {
    if (mask[static_cast<std::size_t>(j)]) s += std::abs(gamma[j]);
  }
  return s;
}

double penalty_change(const Eigen::VectorXd& from, const Eigen::VectorXd& to,
                      const std::vector<bool>& mask) {
  double s = 0.0;
  for (Index j = 0; j < from.size(); ++j) {
    if (mask[static_cast<std::size_t>(j)]) s += std::abs(to[j]) - std::abs(from[j]);
  }
  return s;
}

void finish(FitResult& out, const DesignMatrix& design, const Eigen::VectorXd& treatment) {
  out.pi_hat = propensity(linear_predictor(design, out.coef));
  bool overflow = false;
  out.loss = loss_value(out.kind, design.values() * out.coef.gamma, treatment, &overflow);
  out.overflow = out.overflow || overflow;
  out.penalized_loss = out.loss + out.lambda * out.coef.penalty_l1();
  out.kkt = check_kkt(out.kind, design, treatment, out.coef, out.lambda);
}

Eigen::VectorXd newton_direction(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& grad) {
  const double scale = std::max(hessian.diagonal().maxCoeff(), std::numeric_limits<double>::min());
  Eigen::LLT<Eigen::MatrixXd> llt(hessian);
  double mu = 1e-12 * scale;
  for (int attempt = 0; attempt < 30; ++attempt) {
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd d = llt.solve(-grad);
      if (d.allFinite()) return d;
    }
    llt.compute(hessian + mu * Eigen::MatrixXd::Identity(hessian.rows(), hessian.cols()));
    mu *= 10.0;
  }
  return -grad;
}

}  // namespace

std::string_view to_string(Surrogate s) noexcept {
  return s == Surrogate::Q2 ? "Q2" : "Q3";
}

std::string_view to_string(FitStatus s) noexcept {
  switch (s) {
    case FitStatus::Converged: return "Converged";
    case FitStatus::Separation: return "Separation";
    case FitStatus::IterationLimit: return "IterationLimit";
    case FitStatus::LineSearchStall: return "LineSearchStall";
  }
  return "Unknown";
}

void SolverConfig::validate() const {
  if (max_outer_iters <= 0) throw Error(ErrorCode::InvalidArgument, "max_outer_iters must be positive");
  if (!(outer_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "outer_tol must be positive");
  if (!(kkt_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "kkt_tol must be positive");
  if (!(backtrack_shrink > 0.0 && backtrack_shrink < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "backtrack_shrink must lie in (0, 1)");
  }
  if (!(backtrack_min_step > 0.0 && backtrack_min_step <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "backtrack_min_step must lie in (0, 1]");
  }
  if (!(predictor_cap > 0.0)) throw Error(ErrorCode::InvalidArgument, "predictor_cap must be positive");
  if (inner_max_active_updates < 0) {
    throw Error(ErrorCode::InvalidArgument, "inner_max_active_updates must be nonnegative");
  }
}

bool KktReport::passes(double lambda, double tol) const {
  return std::abs(intercept_residual) <= tol && max_abs_box <= lambda + tol && stationarity <= tol;
}

Eigen::VectorXd surrogate_weights(LossKind kind, Surrogate surrogate, const Eigen::VectorXd& pi) {
  const Index n = pi.size();
  switch (kind) {
    case LossKind::ML:
      return pi.array() * (1.0 - pi.array());
    case LossKind::CAL1:
      if (surrogate == Surrogate::Q2) return (1.0 - pi.array()).matrix();
      return Eigen::VectorXd::Ones(n);
    case LossKind::CAL0:
      if (surrogate == Surrogate::Q2) return pi;
      return Eigen::VectorXd::Ones(n);
    case LossKind::BAL:
      return Eigen::VectorXd::Ones(n);
  }
  return Eigen::VectorXd::Ones(n);
}

KktReport check_kkt(LossKind kind, const DesignMatrix& design, const Eigen::VectorXd& treatment,
                    const Coefficients& coef, double lambda) {
  const LossEvaluation ev = eval_loss(kind, design, treatment, coef);
  const double sign = kind == LossKind::CAL0 ? 1.0 : -1.0;
  const Eigen::VectorXd resid = sign * ev.gradient;
  KktReport r;
  r.intercept_residual = resid[0];
  r.box_residuals = resid.tail(resid.size() - 1);
  r.max_abs_box = r.box_residuals.size() > 0 ? r.box_residuals.cwiseAbs().maxCoeff() : 0.0;
  for (Index j = 1; j < coef.size(); ++j) {
    if (coef.gamma[j] != 0.0) r.active_set.push_back(j);
  }
  r.stationarity = stationarity(ev.gradient, coef, lambda);
  return r;
}

FitResult fit_unpenalized(LossKind kind, const DesignMatrix& design,
                          const Eigen::VectorXd& treatment, const SolverConfig& config) {
  config.validate();
  check_inputs(design, treatment);
  const Eigen::MatrixXd& f = design.values();

  FitResult out;
  out.kind = kind;
  out.coef = default_start(treatment, design.cols());
  Eigen::VectorXd g = f * out.coef.gamma;
  bool overflow = false;
  double value = loss_value(kind, g, treatment, &overflow);
  out.trajectory.push_back(value);

  int over_cap = 0;
  out.status = FitStatus::IterationLimit;
  for (int iter = 0; iter < config.max_outer_iters; ++iter) {
    const LossEvaluation ev = eval_loss_at(kind, f, treatment, g);
    overflow = overflow || ev.overflow;
    const double grad_norm = ev.gradient.cwiseAbs().maxCoeff();
    if (grad_norm <= config.kkt_tol) {
      // One full Newton step from here usually lands at rounding level.
      const Eigen::VectorXd polished =
          out.coef.gamma + newton_direction(weighted_gram(f, ev.hessian_weights), ev.gradient);
      const Eigen::VectorXd pg = f * polished;
      const LossEvaluation pe = eval_loss_at(kind, f, treatment, pg);
      if (pe.gradient.allFinite() && pe.gradient.cwiseAbs().maxCoeff() < grad_norm) {
        out.coef.gamma = polished;
        g = pg;
      }
      out.status = FitStatus::Converged;
      break;
    }
    Eigen::VectorXd d = newton_direction(weighted_gram(f, ev.hessian_weights), ev.gradient);
    Eigen::VectorXd dg = f * d;
    const double shift = dg.cwiseAbs().maxCoeff();
    if (shift > kMaxNewtonShift) {
      d *= kMaxNewtonShift / shift;
      dg *= kMaxNewtonShift / shift;
    }
    double slope = ev.gradient.dot(d);
    if (!(slope < 0.0)) {
      d = -ev.gradient;
      dg = f * d;
      slope = ev.gradient.dot(d);
    }

    double t = 1.0;
    double change = 0.0;
    bool accepted = false;
    while (t >= config.backtrack_min_step) {
      change = loss_change(kind, g, t * dg, treatment);
      if (change <= kArmijo * t * slope && change < 0.0) {
        accepted = true;
        break;
      }
      t *= config.backtrack_shrink;
    }
    if (!accepted) {
      out.status = FitStatus::LineSearchStall;
      break;
    }
    out.coef.gamma += t * d;
    g = f * out.coef.gamma;
    value += change;
    out.trajectory.push_back(value);
    out.decreases.push_back(change);
    ++out.iterations;

    over_cap = g.cwiseAbs().maxCoeff() > config.predictor_cap ? over_cap + 1 : 0;
    if (over_cap >= kSeparationPatience) {
      out.status = FitStatus::Separation;
      break;
    }
  }
  if (out.status == FitStatus::IterationLimit && g.cwiseAbs().maxCoeff() > config.predictor_cap) {
    out.status = FitStatus::Separation;
  }
  out.overflow = overflow;
  finish(out, design, treatment);
  return out;
}

FitResult fit_lasso(LossKind kind, const DesignMatrix& design, const Eigen::VectorXd& treatment,
                    double lambda, const SolverConfig& config,
                    const std::optional<Coefficients>& warm_start) {
  config.validate();
  check_inputs(design, treatment);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::InvalidArgument, "lambda must be finite and >= 0");
  }
  const Eigen::MatrixXd& f = design.values();
  const Index n = f.rows();

  FitResult out;
  out.kind = kind;
  out.lambda = lambda;
  if (warm_start) {
    if (warm_start->size() != design.cols() ||
        warm_start->penalty_mask.size() != static_cast<std::size_t>(design.cols())) {
      throw Error(ErrorCode::DimensionMismatch, "warm start does not match the design");
    }
    if (!warm_start->gamma.allFinite()) throw Error(ErrorCode::NonFinite, "warm start is not finite");
    out.coef = *warm_start;
  } else {
    out.coef = default_start(treatment, design.cols());
  }
  const std::vector<bool>& mask = out.coef.penalty_mask;

  Eigen::VectorXd g = f * out.coef.gamma;
  bool overflow = false;
  double objective = loss_value(kind, g, treatment, &overflow) + lambda * penalty_l1(out.coef.gamma, mask);
  out.trajectory.push_back(objective);

  ActiveSetOptions inner_options;
  inner_options.max_updates = config.inner_max_active_updates;
  ActiveSetLasso inner(inner_options);
  // ML and BAL are fitted with their observed curvature under either surrogate.
  const bool newton = kind == LossKind::ML || kind == LossKind::BAL;
  const bool fixed_gram = config.surrogate == Surrogate::Q3 && !newton;
  if (fixed_gram) {
    inner.set_gram(weighted_gram(f, surrogate_weights(kind, config.surrogate, Eigen::VectorXd::Zero(n))));
  }

  int over_cap = 0;
  bool small_decrease = false;
  out.status = FitStatus::IterationLimit;
  for (int iter = 0; iter <= config.max_outer_iters; ++iter) {
    const LossEvaluation ev = eval_loss_at(kind, f, treatment, g);
    overflow = overflow || ev.overflow;
    const double stat = stationarity(ev.gradient, out.coef, lambda);
    if (stat <= config.kkt_tol / 8.0 || (small_decrease && stat <= config.kkt_tol)) {
      out.status = FitStatus::Converged;
      break;
    }
    if (iter == config.max_outer_iters) break;

    if (!fixed_gram) {
      inner.set_gram(weighted_gram(
          f, kind == LossKind::BAL ? ev.hessian_weights : surrogate_weights(kind, config.surrogate, propensity(g))));
    }
    const Eigen::VectorXd b = inner.gram() * out.coef.gamma - ev.gradient;
    const ActiveSetResult step = inner.solve(b, lambda, mask, out.coef.gamma);
    out.rank_deficient = out.rank_deficient || step.rank_deficient;

    const Eigen::VectorXd d = step.gamma - out.coef.gamma;
    const Eigen::VectorXd dg = f * d;
    double t = 1.0;
    bool accepted = false;
    double change = 0.0;
    Eigen::VectorXd candidate;
    while (t >= config.backtrack_min_step) {
      candidate = t == 1.0 ? step.gamma : Eigen::VectorXd(out.coef.gamma + t * d);
      change = loss_change(kind, g, t * dg, treatment) +
               lambda * penalty_change(out.coef.gamma, candidate, mask);
      if (change < 0.0) {
        accepted = true;
        break;
      }
      t *= config.backtrack_shrink;
    }
    if (!accepted) {
      out.status = stat <= config.kkt_tol ? FitStatus::Converged : FitStatus::LineSearchStall;
      break;
    }
    out.coef.gamma = candidate;
    g = f * out.coef.gamma;
    objective += change;
    out.trajectory.push_back(objective);
    out.decreases.push_back(change);
    ++out.iterations;
    small_decrease = -change <= config.outer_tol * std::max(1.0, std::abs(objective));

    over_cap = g.cwiseAbs().maxCoeff() > config.predictor_cap ? over_cap + 1 : 0;
    if (over_cap >= kSeparationPatience) {
      out.status = FitStatus::Separation;
      break;
    }
  }
  if (out.status == FitStatus::IterationLimit && g.cwiseAbs().maxCoeff() > config.predictor_cap) {
    out.status = FitStatus::Separation;
  }
  out.overflow = overflow;
  finish(out, design, treatment);
  return out;
}

}  // namespace calps
