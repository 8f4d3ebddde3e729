#pragma once

#include <optional>
#include <string_view>

#include <Eigen/Core>

#include "calps/data.hpp"

namespace calps {

enum class Orientation { Treated, Untreated };

std::string_view to_string(Orientation o) noexcept;

/// Inverse-probability weights on one arm: 1/pi on the treated, 1/(1 - pi)
/// on the untreated, in row order of that arm.
Eigen::VectorXd arm_weights(const Eigen::VectorXd& treatment, const Eigen::VectorXd& pi_hat,
                            Orientation orientation);

struct IpwMeans {
  double ipw;
  double ripw;
};

/// Treated: ipw = E~[T Y / pi], ripw = ipw / E~[T / pi]; Untreated mirrors
/// with 1 - T and 1 - pi. Outcomes off the arm are ignored (may be NaN).
IpwMeans ipw_means(const Eigen::VectorXd& treatment, const Eigen::VectorXd& outcome,
                   const Eigen::VectorXd& pi_hat, Orientation orientation);

struct AttEstimate {
  double nu1;
  double nu0_ipw;
  double nu0_ripw;
  /// nu1 - nu0_ripw.
  double att;
};

/// nu1 = E~(TY)/E~(T); nu0 weights the untreated by the odds pi/(1 - pi).
AttEstimate estimate_att(const Eigen::VectorXd& treatment, const Eigen::VectorXd& outcome,
                         const Eigen::VectorXd& pi_hat);

/// Untreated-arm weights proportional to exp(gamma_{1:p}^T f_{1:p}(X)),
/// normalized to sum to one (zero on the treated). For a calibrated CAL0 fit
/// these reproduce the treated means of every design column.
Eigen::VectorXd entropy_balancing_weights(const DesignMatrix& design, const Eigen::VectorXd& treatment,
                                          const Coefficients& coef);

/// Per non-intercept column: (ratio-IPW mean of f_j on the arm - E~ f_j) / sd(f_j).
Eigen::VectorXd std_calibration_diff(const DesignMatrix& design, const Eigen::VectorXd& treatment,
                                     const Eigen::VectorXd& pi_hat, Orientation orientation);

/// sum (w_i - w_bar)^2 / ((n1 - 1) w_bar^2).
double relative_variance(const Eigen::VectorXd& weights);

/// Standard error of the ratio-IPW mean with the weights held fixed:
/// sqrt(E~[(T/pi)^2 (Y - mu)^2] / n) / E~[T/pi] for the treated.
double nominal_se(const Eigen::VectorXd& treatment, const Eigen::VectorXd& outcome,
                  const Eigen::VectorXd& pi_hat, Orientation orientation);

struct EstimateReport {
  double mu1_ipw = 0.0;
  double mu1_ripw = 0.0;
  double mu0_ipw = 0.0;
  double mu0_ripw = 0.0;
  /// mu1_ripw - mu0_ripw.
  double ate = 0.0;
  double se_mu1 = 0.0;
  double se_mu0 = 0.0;
  double se_ate = 0.0;
  std::optional<AttEstimate> att;
  Eigen::VectorXd balance_treated;
  Eigen::VectorXd balance_untreated;
  double relvar_treated = 0.0;
  double relvar_untreated = 0.0;
  double lambda_treated = 0.0;
  double lambda_untreated = 0.0;
};

/// `pi_treated` is used for mu1 (typically a CAL1 fit), `pi_untreated` for
/// mu0 and the ATT (typically a CAL0 fit). Both are P(T = 1 | X).
EstimateReport make_estimate_report(const DesignMatrix& design, const Eigen::VectorXd& treatment,
                                    const Eigen::VectorXd& outcome, const Eigen::VectorXd& pi_treated,
                                    const Eigen::VectorXd& pi_untreated);

}  // namespace calps
