#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "calps/data.hpp"
#include "calps/losses.hpp"
#include "calps/solver.hpp"

namespace calps {

/// CorrectlySpecified: f_j = X_j. Misspecified: standardized Kang-Schafer
/// transforms W of the first four covariates.
enum class Scenario { CorrectlySpecified, Misspecified };

enum class HConfig { Lin1, Lin2, Quad1, Quad2, Exp, Noise };
inline constexpr std::array<HConfig, 6> kAllHConfigs = {HConfig::Lin1,  HConfig::Lin2, HConfig::Quad1,
                                                        HConfig::Quad2, HConfig::Exp,  HConfig::Noise};

enum class SimEstimator { True, Const, ML, RML, CAL, RCAL };
inline constexpr std::array<SimEstimator, 6> kAllEstimators = {
    SimEstimator::True, SimEstimator::Const, SimEstimator::ML,
    SimEstimator::RML,  SimEstimator::CAL,   SimEstimator::RCAL};

std::string_view to_string(Scenario s) noexcept;
std::string_view to_string(HConfig h) noexcept;
std::string_view to_string(SimEstimator e) noexcept;
Scenario parse_scenario(std::string_view text);
HConfig parse_h_config(std::string_view text);
SimEstimator parse_estimator(std::string_view text);

/// Outcome-regression function evaluated on the first four entries of x.
/// Noise returns 0 (the error term is carried separately).
double h_function(HConfig h, const Eigen::Ref<const Eigen::RowVectorXd>& x);

/// E{h(X)} for X standard normal.
double h_expectation(HConfig h) noexcept;

/// Monte Carlo estimate of E{h(X)} from `draws` seeded normal vectors.
double h_expectation_mc(HConfig h, Index draws, std::uint64_t seed);

struct SimConfig {
  Index n = 200;
  Index p = 4;
  Scenario scenario = Scenario::CorrectlySpecified;
  int n_reps = 100;
  std::vector<SimEstimator> estimators{kAllEstimators.begin(), kAllEstimators.end()};
  std::uint64_t seed = 1;
  int cv_folds = 5;
  int grid_subdiv = 1;
  int grid_depth = 10;
  /// 0 uses the hardware concurrency.
  int threads = 1;
  SolverConfig solver;

  /// Throws InvalidArgument.
  void validate() const;
};

struct SimReplicate {
  Eigen::MatrixXd X;
  Eigen::VectorXd g_star;
  Eigen::VectorXd pi_star;
  Eigen::VectorXd treatment;
  DesignMatrix design;
  Eigen::VectorXd epsilon;
};

/// log-odds X1 - 0.5 X2 + 0.25 X3 + 0.1 X4 of being untreated.
Eigen::VectorXd true_log_odds(const Eigen::MatrixXd& X);

/// The four misspecification transforms (plus X_j for j > 4), unstandardized.
Eigen::MatrixXd kang_schafer_transforms(const Eigen::MatrixXd& X);

SimReplicate generate_replicate(const SimConfig& config, std::uint64_t rep_seed);

/// Result of one estimator on one replicate.
struct EstimatorOutcome {
  bool converged = true;
  FitStatus status = FitStatus::Converged;
  /// Ratio-IPW mean of each h in kAllHConfigs order; the Noise slot holds the
  /// ratio-IPW mean of epsilon.
  std::array<double, 6> mu{};
  double kappa_ml = 0.0;
  double kappa_cal = 0.0;
  double mse = 0.0;
  double msre = 0.0;
  Index nonzero = 0;
  Index nonzero_first4 = 0;
  double lambda = 0.0;
};

struct ReplicateRecord {
  int rep = 0;
  std::uint64_t seed = 0;
  /// Same order as SimConfig::estimators.
  std::vector<EstimatorOutcome> outcomes;
  double kappa_ml_star = 0.0;
  double kappa_cal_star = 0.0;
};

struct EstimatorSummary {
  SimEstimator estimator = SimEstimator::True;
  int included = 0;
  int nonconverged = 0;
  /// Root mean squared error of the ratio-IPW mean about E{h(X)}, per
  /// kAllHConfigs entry (Noise: about zero).
  std::array<double, 6> rmse{};
  double risk_ml = 0.0;
  double risk_cal = 0.0;
  double diff = 0.0;
  double rdiff = 0.0;
  double mean_nonzero = 0.0;
  double mean_nonzero_first4 = 0.0;
};

struct MetricTable {
  SimConfig config;
  std::vector<EstimatorSummary> rows;
  std::vector<ReplicateRecord> replicates;
};

ReplicateRecord run_replicate(const SimConfig& config, int rep);

/// Aggregates replicate records in index order. Non-converged fits are
/// excluded from that estimator's cells and counted.
std::vector<EstimatorSummary> summarize(const SimConfig& config,
                                        const std::vector<ReplicateRecord>& replicates);

MetricTable run_monte_carlo(const SimConfig& config);

/// Minimizes the loss with T replaced by pi_star.
FitResult limiting_fit(LossKind kind, const DesignMatrix& design, const Eigen::VectorXd& pi_star,
                       const SolverConfig& config = {});

struct LimitingDesign {
  Eigen::VectorXd x;
  Eigen::VectorXd g_star;
  Eigen::VectorXd pi_star;
  DesignMatrix design;
};

/// x_i = Phi^{-1}(i/(n+1)), f = [1, exp(x/2)], pi* = 1/(1 + e^x).
LimitingDesign limiting_design(Index n = 400);

struct LimitingSummary {
  LossKind kind;
  FitResult fit;
  double mse;
  double msre;
};

/// ML, CAL1 and BAL limiting fits with mse and msre of the fitted
/// propensities evaluated on the design points.
std::vector<LimitingSummary> limiting_experiment(const LimitingDesign& setup,
                                                 const SolverConfig& config = {});

}  // namespace calps
