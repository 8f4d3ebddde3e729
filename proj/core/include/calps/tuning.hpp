#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "calps/data.hpp"
#include "calps/losses.hpp"
#include "calps/solver.hpp"

namespace calps {

/// values[j] = lambda0 * 2^{-j/subdiv}, j = 0..depth.
struct LambdaGrid {
  double lambda0 = 0.0;
  int subdiv = 1;
  int depth = 10;
  std::vector<double> ratios;
  std::vector<double> values;

  static LambdaGrid make(double lambda0, int subdiv = 1, int depth = 10);
};

/// Smallest lambda at which the penalized loss is minimized with all slopes
/// zero: max_j |E~[r f_j]| with r the residual of the intercept-only fit
/// pi0 = E~(T) (T/pi0 - 1 for CAL1, T - pi0 for ML, the untreated mirror for
/// CAL0, and their difference for BAL).
double lambda_max(LossKind kind, const DesignMatrix& design, const Eigen::VectorXd& treatment);

/// Random partition of 0..n-1 into `folds` parts whose sizes differ by at most one.
std::vector<int> fold_assignment(Index n, int folds, std::uint64_t seed);

/// Fits down the grid, each fit warm-started from the previous one.
std::vector<FitResult> fit_path(LossKind kind, const DesignMatrix& design,
                                const Eigen::VectorXd& treatment, const LambdaGrid& grid,
                                const SolverConfig& config = {});

struct CvResult {
  LambdaGrid grid;
  /// Mean held-out loss per lambda; +inf when some fold fit failed.
  std::vector<double> cv_values;
  /// fold_values[l][k]: held-out loss of fold k at lambda l.
  std::vector<std::vector<double>> fold_values;
  double selected_lambda = 0.0;
  int selected_index = 0;
  std::vector<int> fold_assignment;
  int folds = 5;
  std::uint64_t seed = 0;
};

/// K-fold cross-validation of the unpenalized held-out loss. Ties go to the
/// larger lambda. Throws NoViableLambda when every lambda has a failed fold.
CvResult cross_validate(LossKind kind, const DesignMatrix& design, const Eigen::VectorXd& treatment,
                        const LambdaGrid& grid, int folds, std::uint64_t seed,
                        const SolverConfig& config = {});

}  // namespace calps
