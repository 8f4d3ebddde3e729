#include "calps/losses.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include <boost/math/special_functions/log1p.hpp>

#include "calps/error.hpp"
#include "calps/numeric.hpp"

namespace calps {

std::string_view to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::ML: return "ml";
    case LossKind::CAL1: return "cal1";
    case LossKind::CAL0: return "cal0";
    case LossKind::BAL: return "bal";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "ml") return LossKind::ML;
  if (s == "cal1" || s == "cal") return LossKind::CAL1;
  if (s == "cal0") return LossKind::CAL0;
  if (s == "bal") return LossKind::BAL;
  throw Error(ErrorCode::InvalidArgument, "unknown loss kind '" + s + "'");
}

namespace {

void flag_if_large(double g, bool* overflow) {
  if (overflow && std::abs(g) > kExpCap) *overflow = true;
}

PointLoss cal1_point(double g, double t) {
  const double e = capped_exp(-g);
  return {t * e + (1.0 - t) * g, -t * e + 1.0 - t, t * e};
}

PointLoss cal0_point(double g, double t) {
  const double e = capped_exp(g);
  return {(1.0 - t) * e - t * g, (1.0 - t) * e - t, (1.0 - t) * e};
}

}  // namespace

PointLoss point_loss(LossKind kind, double g, double t, bool* overflow) noexcept {
  flag_if_large(g, overflow);
  switch (kind) {
    case LossKind::ML: {
      const double pi = propensity(g);
      return {softplus(g) - t * g, pi - t, pi * (1.0 - pi)};
    }
    case LossKind::CAL1:
      return cal1_point(g, t);
    case LossKind::CAL0:
      return cal0_point(g, t);
    case LossKind::BAL: {
      const PointLoss a = cal1_point(g, t);
      const PointLoss b = cal0_point(g, t);
      return {a.value + b.value, a.slope + b.slope, a.curvature + b.curvature};
    }
  }
  return {0.0, 0.0, 0.0};
}

LossEvaluation eval_loss_at(LossKind kind, const Eigen::MatrixXd& f, const Eigen::VectorXd& treatment,
                            const Eigen::VectorXd& g) {
  const Index n = f.rows();
  if (treatment.size() != n || g.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "loss inputs have inconsistent lengths");
  }
  if (kind == LossKind::BAL) {
    LossEvaluation out = eval_loss_at(LossKind::CAL1, f, treatment, g);
    const LossEvaluation other = eval_loss_at(LossKind::CAL0, f, treatment, g);
    out.value += other.value;
    out.gradient += other.gradient;
    out.hessian_weights += other.hessian_weights;
    out.overflow = out.overflow || other.overflow;
    return out;
  }
  LossEvaluation out;
  Eigen::VectorXd values(n);
  Eigen::VectorXd slopes(n);
  out.hessian_weights.resize(n);
  for (Index i = 0; i < n; ++i) {
    const PointLoss pl = point_loss(kind, g[i], treatment[i], &out.overflow);
    values[i] = pl.value;
    slopes[i] = pl.slope;
    out.hessian_weights[i] = pl.curvature;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.value = pairwise_sum(values) * inv_n;
  out.gradient = f.transpose() * slopes * inv_n;
  return out;
}

LossEvaluation eval_loss(LossKind kind, const DesignMatrix& design, const Eigen::VectorXd& treatment,
                         const Coefficients& coef) {
  return eval_loss_at(kind, design.values(), treatment, linear_predictor(design, coef));
}

double loss_value(LossKind kind, const Eigen::VectorXd& g, const Eigen::VectorXd& treatment,
                  bool* overflow) {
  Eigen::VectorXd values(g.size());
  for (Index i = 0; i < g.size(); ++i) values[i] = point_loss(kind, g[i], treatment[i], overflow).value;
  return pairwise_mean(values);
}

namespace {

double softplus_change(double g0, double d) {
  if (g0 <= 0.0 || d >= 0.0) return std::log1p(propensity(g0) * std::expm1(d));
  return d + std::log1p(propensity(-g0) * std::expm1(-d));
}

double cal1_change(double g0, double d, double t) {
  return t * capped_exp(-g0) * std::expm1(-d) + (1.0 - t) * d;
}

double cal0_change(double g0, double d, double t) {
  return (1.0 - t) * capped_exp(g0) * std::expm1(d) - t * d;
}

}  // namespace

double loss_change(LossKind kind, const Eigen::VectorXd& g, const Eigen::VectorXd& delta,
                   const Eigen::VectorXd& treatment) {
  const Index n = g.size();
  Eigen::VectorXd terms(n);
  for (Index i = 0; i < n; ++i) {
    const double t = treatment[i];
    const double d = delta[i];
    switch (kind) {
      case LossKind::ML: terms[i] = softplus_change(g[i], d) - t * d; break;
      case LossKind::CAL1: terms[i] = cal1_change(g[i], d, t); break;
      case LossKind::CAL0: terms[i] = cal0_change(g[i], d, t); break;
      case LossKind::BAL: terms[i] = cal1_change(g[i], d, t) + cal0_change(g[i], d, t); break;
    }
  }
  return pairwise_mean(terms);
}

namespace {

void require_open_unit(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorCode::DomainError, std::string(what) + " must lie in (0, 1)");
  }
}

}  // namespace

DivergenceTriple divergences(double rho, double rho_prime) {
  require_open_unit(rho, "rho");
  require_open_unit(rho_prime, "rho'");
  const double x1 = rho_prime / rho - 1.0;
  const double kl = rho_prime * std::log(rho_prime / rho) +
                    (1.0 - rho_prime) * std::log((1.0 - rho_prime) / (1.0 - rho));
  return {std::max(kl, 0.0), std::max(-boost::math::log1pmx(x1), 0.0), x1 * x1};
}

bool prop4_bound_holds(double rho, double rho_prime, double a) {
  if (!(a > 0.0 && a <= 0.5)) {
    throw Error(ErrorCode::PreconditionViolated, "a must lie in (0, 1/2]");
  }
  if (rho < a * rho_prime) {
    throw Error(ErrorCode::PreconditionViolated, "rho < a * rho'");
  }
  const DivergenceTriple d = divergences(rho, rho_prime);
  return d.Q <= 5.0 / (3.0 * a) * d.K;
}

double prop4_boundary_margin(double a) {
  if (!(a > 0.0)) throw Error(ErrorCode::DomainError, "a must be positive");
  return 0.2 + 0.4 / a - 0.6 * a + std::log(a);
}

double empirical_bregman(BregmanKind kind, const Eigen::VectorXd& g, const Eigen::VectorXd& g_prime,
                         const Eigen::VectorXd& treatment, bool* overflow) {
  const Index n = g.size();
  if (g_prime.size() != n || treatment.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "bregman inputs have inconsistent lengths");
  }
  Eigen::VectorXd terms(n);
  for (Index i = 0; i < n; ++i) {
    flag_if_large(g[i], overflow);
    flag_if_large(g_prime[i], overflow);
    const double d = g[i] - g_prime[i];
    double term;
    if (kind == BregmanKind::ML) {
      // The T terms of the ML loss are linear in g and cancel.
      term = softplus_change(g_prime[i], d) - propensity(g_prime[i]) * d;
    } else {
      term = treatment[i] * capped_exp(-g_prime[i]) * (std::expm1(-d) + d);
    }
    // Each term is a scalar Bregman divergence; negatives are rounding.
    terms[i] = std::max(term, 0.0);
  }
  return pairwise_mean(terms);
}

RiskMeasures risk_measures(const Eigen::VectorXd& g_hat, const Eigen::VectorXd& g_star,
                           const Eigen::VectorXd& treatment) {
  const Index n = g_hat.size();
  if (g_star.size() != n || treatment.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "risk inputs have inconsistent lengths");
  }
  Eigen::VectorXd kml(n), kcal(n), mse(n), msre(n);
  for (Index i = 0; i < n; ++i) {
    const double pi_star = propensity(g_star[i]);
    if (!(pi_star > 0.0 && pi_star < 1.0)) {
      throw Error(ErrorCode::DomainError, "true propensity saturated at 0 or 1");
    }
    const double pi_hat = propensity(g_hat[i]);
    const double t = treatment[i];
    kml[i] = softplus(g_hat[i]) - pi_star * g_hat[i];
    kcal[i] = t * (capped_exp(-g_hat[i]) + capped_exp(-g_star[i]) * g_hat[i]);
    const double w = t / pi_star;
    mse[i] = w * (pi_hat - pi_star) * (pi_hat - pi_star);
    const double rel = t == 0.0 ? 0.0 : pi_star / pi_hat - 1.0;
    msre[i] = w * rel * rel;
  }
  return {pairwise_mean(kml), pairwise_mean(kcal), pairwise_mean(mse), pairwise_mean(msre)};
}

double mse_bound(double c, double delta, double msre, Index n) {
  if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorCode::DomainError, "delta must lie in (0, 1)");
  if (!(c > 0.0)) throw Error(ErrorCode::DomainError, "c must be positive");
  if (!(msre >= 0.0)) throw Error(ErrorCode::DomainError, "msre must be nonnegative");
  if (n <= 0) throw Error(ErrorCode::DomainError, "n must be positive");
  return c * msre + 2.0 / (static_cast<double>(n) * delta) * c * (1.0 + msre);
}

}  // namespace calps
