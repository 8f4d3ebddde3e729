#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "calps/data.hpp"
#include "calps/losses.hpp"

namespace calps {

/// Q2: Fisher-scored curvature weights. Q3: constant Gram weights (the Gram
/// matrix, hence its factorization, stays fixed across outer iterations).
enum class Surrogate { Q2, Q3 };

std::string_view to_string(Surrogate s) noexcept;

struct SolverConfig {
  int max_outer_iters = 1000;
  /// Relative decrease of the penalized loss below which iteration stops.
  double outer_tol = 1e-9;
  double kkt_tol = 1e-8;
  Surrogate surrogate = Surrogate::Q3;
  double backtrack_shrink = 0.5;
  double backtrack_min_step = 0x1p-30;
  /// max |g_i| beyond which a still-decreasing fit is declared separated.
  double predictor_cap = 30.0;
  /// 0 selects the inner solver's default.
  int inner_max_active_updates = 0;

  /// Throws InvalidArgument.
  void validate() const;
};

enum class FitStatus { Converged, Separation, IterationLimit, LineSearchStall };

std::string_view to_string(FitStatus s) noexcept;

/// Calibration residuals of a fit. For CAL1 the intercept residual is
/// E~[T/pi] - 1 and the box residuals are E~[(T/pi - 1) f_j]; ML uses
/// E~[(T - pi) f_j], CAL0 the untreated mirror, BAL the treated minus the
/// untreated residual. Each residual vector is, up to sign, the loss gradient.
struct KktReport {
  double intercept_residual = 0.0;
  Eigen::VectorXd box_residuals;
  /// Penalized columns (1-based design indices) with nonzero coefficient.
  std::vector<Index> active_set;
  double max_abs_box = 0.0;
  /// Max over coordinates of the subgradient-optimality violation.
  double stationarity = 0.0;

  bool passes(double lambda, double tol) const;
};

struct FitResult {
  LossKind kind = LossKind::CAL1;
  Coefficients coef;
  Eigen::VectorXd pi_hat;
  double loss = 0.0;
  double penalized_loss = 0.0;
  double lambda = 0.0;
  FitStatus status = FitStatus::IterationLimit;
  KktReport kkt;
  int iterations = 0;
  /// Penalized loss at the start and after every accepted step.
  std::vector<double> trajectory;
  /// Accepted changes of the penalized loss, each evaluated directly.
  std::vector<double> decreases;
  bool rank_deficient = false;
  bool overflow = false;

  bool converged() const { return status == FitStatus::Converged; }
};

KktReport check_kkt(LossKind kind, const DesignMatrix& design, const Eigen::VectorXd& treatment,
                    const Coefficients& coef, double lambda);

/// Damped Newton minimization of the unpenalized loss.
FitResult fit_unpenalized(LossKind kind, const DesignMatrix& design,
                          const Eigen::VectorXd& treatment, const SolverConfig& config = {});

/// Fisher-scoring descent for loss + lambda ||gamma_{1:p}||_1.
FitResult fit_lasso(LossKind kind, const DesignMatrix& design, const Eigen::VectorXd& treatment,
                    double lambda, const SolverConfig& config = {},
                    const std::optional<Coefficients>& warm_start = std::nullopt);

/// Surrogate curvature weights at fitted probabilities pi. For BAL these are
/// the Fisher weights; fit_lasso uses the observed BAL curvature instead.
Eigen::VectorXd surrogate_weights(LossKind kind, Surrogate surrogate, const Eigen::VectorXd& pi);

}  // namespace calps
