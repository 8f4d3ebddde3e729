#pragma once

#include <string_view>

#include <Eigen/Core>

#include "calps/data.hpp"

namespace calps {

/// ML   : average negative log-likelihood, log(1 + e^g) - T g
/// CAL1 : calibration loss for the treated, T e^{-g} + (1 - T) g
/// CAL0 : calibration loss for the untreated, (1 - T) e^{g} - T g
/// BAL  : CAL1 + CAL0 (covariate balancing)
enum class LossKind { ML, CAL1, CAL0, BAL };

std::string_view to_string(LossKind kind) noexcept;
/// Accepts ml, cal1 (or cal), cal0, bal; case-insensitive.
LossKind parse_loss_kind(std::string_view text);

/// Value and first two derivatives of the per-observation loss in g.
struct PointLoss {
  double value;
  double slope;
  double curvature;
};

/// `t` may be fractional (the limiting fits replace T by pi*).
PointLoss point_loss(LossKind kind, double g, double t, bool* overflow = nullptr) noexcept;

struct LossEvaluation {
  double value = 0.0;
  Eigen::VectorXd gradient;
  /// Hessian = (1/n) f^T diag(hessian_weights) f.
  Eigen::VectorXd hessian_weights;
  /// Some |g_i| exceeded the exponent cap; exponentials were saturated.
  bool overflow = false;
};

LossEvaluation eval_loss(LossKind kind, const DesignMatrix& design, const Eigen::VectorXd& treatment,
                         const Coefficients& coef);

/// Same as eval_loss with the linear predictor already computed.
LossEvaluation eval_loss_at(LossKind kind, const Eigen::MatrixXd& f, const Eigen::VectorXd& treatment,
                            const Eigen::VectorXd& g);

/// Average loss at linear predictor g.
double loss_value(LossKind kind, const Eigen::VectorXd& g, const Eigen::VectorXd& treatment,
                  bool* overflow = nullptr);

/// loss(g + delta) - loss(g), evaluated termwise with expm1/log1p so that
/// tiny changes are resolved far below the rounding level of loss(g) itself.
double loss_change(LossKind kind, const Eigen::VectorXd& g, const Eigen::VectorXd& delta,
                   const Eigen::VectorXd& treatment);

/// Divergences between probabilities rho (fitted) and rho' (reference):
///   L = rho' log(rho'/rho) + (1 - rho') log((1 - rho')/(1 - rho))  (Kullback-Leibler, >= 0)
///   K = rho'/rho - 1 - log(rho'/rho)
///   Q = (rho'/rho - 1)^2
/// L is stored with the sign that makes it nonnegative, which is the form under
/// which D_ML = E~[L] and D_CAL = E~[(T/pi')(K + L)] hold.
struct DivergenceTriple {
  double L;
  double K;
  double Q;
};

DivergenceTriple divergences(double rho, double rho_prime);

/// Whether Q(rho, rho') <= 5/(3a) K(rho, rho'). Requires a in (0, 1/2] and
/// rho >= a rho' (throws PreconditionViolated otherwise).
bool prop4_bound_holds(double rho, double rho_prime, double a);

/// h(1/a) for h(x) = x - 1 - log x - 0.6 a (x - 1)^2, i.e. 0.2 + 0.4/a - 0.6a + log a.
/// Nonnegativity of this margin on (0, 1/2] is what makes the Q <= 5/(3a) K bound hold.
double prop4_boundary_margin(double a);

enum class BregmanKind { ML, CAL };

/// kappa(g) - kappa(g') - <grad kappa(g'), g - g'> for the ML or CAL1 loss,
/// averaged over observations.
double empirical_bregman(BregmanKind kind, const Eigen::VectorXd& g, const Eigen::VectorXd& g_prime,
                         const Eigen::VectorXd& treatment, bool* overflow = nullptr);

struct RiskMeasures {
  double kappa_ml;
  double kappa_cal;
  double mse;
  double msre;
};

/// Sample risk measures of a fitted log-odds g_hat relative to the truth g_star.
RiskMeasures risk_measures(const Eigen::VectorXd& g_hat, const Eigen::VectorXd& g_star,
                           const Eigen::VectorXd& treatment);

/// c msre + (2 / (n delta)) c (1 + msre).
double mse_bound(double c, double delta, double msre, Index n);

}  // namespace calps
