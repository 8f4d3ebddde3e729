#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "calps/error.hpp"
#include "calps/tuning.hpp"
#include "helpers.hpp"

using namespace calps;
using testing_support::kKinds;

namespace {

DesignMatrix two_point() {
  Eigen::MatrixXd x(2, 1);
  x << 1, -1;
  return testing_support::design_from(x);
}

}  // namespace

TEST(LambdaGrid, HalvingGrid) {
  const auto g = LambdaGrid::make(0.8);
  ASSERT_EQ(g.values.size(), 11u);
  EXPECT_EQ(g.values[0], 0.8);
  for (int j = 0; j <= 10; ++j) EXPECT_DOUBLE_EQ(g.values[j], 0.8 / std::pow(2.0, j));
}

TEST(LambdaGrid, FinerGridIsStrictlyDecreasing) {
  const auto g = LambdaGrid::make(1.3, 4, 40);
  ASSERT_EQ(g.values.size(), 41u);
  EXPECT_EQ(g.values[0], 1.3);
  for (std::size_t j = 1; j < g.values.size(); ++j) EXPECT_LT(g.values[j], g.values[j - 1]);
  EXPECT_DOUBLE_EQ(g.values[4], 0.65);
}

TEST(LambdaGrid, RejectsNonPositiveLambdaZero) {
  try {
    LambdaGrid::make(0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoViableLambda);
  }
  EXPECT_THROW(LambdaGrid::make(1.0, 0, 3), Error);
}

TEST(LambdaMax, HandExamples) {
  const Eigen::Vector2d t(1, 0);
  EXPECT_DOUBLE_EQ(lambda_max(LossKind::CAL1, two_point(), t), 1.0);
  EXPECT_DOUBLE_EQ(lambda_max(LossKind::ML, two_point(), t), 0.5);
}

TEST(LambdaMax, OrthogonalResidualGivesZero) {
  Eigen::MatrixXd x(4, 1);
  x << 1, -1, 1, -1;
  EXPECT_EQ(lambda_max(LossKind::CAL1, testing_support::design_from(x), Eigen::Vector4d(1, 1, 0, 0)), 0.0);
}

TEST(LambdaMax, AgreesWithOracleAndDegenerateTreatmentThrows) {
  const auto in = oracle::random_instance(90, 6, 31);
  const DesignMatrix d = testing_support::design_of(in);
  for (LossKind k : kKinds) {
    EXPECT_NEAR(lambda_max(k, d, in.t), oracle::lambda0(testing_support::to_oracle(k), d.values(), in.t), 1e-14);
  }
  EXPECT_THROW(lambda_max(LossKind::CAL1, d, Eigen::VectorXd::Ones(90)), Error);
}

TEST(LambdaMax, ExactThresholdGivesZeroSlopes) {
  for (LossKind k : kKinds) {
    const auto in = oracle::random_instance(70, 5, 32);
    const DesignMatrix d = testing_support::design_of(in);
    const auto r = fit_lasso(k, d, in.t, lambda_max(k, d, in.t));
    EXPECT_TRUE(r.converged());
    EXPECT_EQ(r.coef.nonzero_count(), 0) << to_string(k);
  }
}

TEST(FoldAssignment, BalancedAndDeterministic) {
  const auto a = fold_assignment(103, 5, 42);
  EXPECT_EQ(a, fold_assignment(103, 5, 42));
  EXPECT_NE(a, fold_assignment(103, 5, 43));
  std::vector<int> count(5, 0);
  for (int f : a) ++count[static_cast<std::size_t>(f)];
  for (int c : count) EXPECT_TRUE(c == 20 || c == 21);
  EXPECT_THROW(fold_assignment(3, 5, 1), Error);
  EXPECT_THROW(fold_assignment(10, 1, 1), Error);
}

TEST(CrossValidate, SinglePointGridAtThreshold) {
  const auto in = oracle::random_instance(100, 4, 33);
  const DesignMatrix d = testing_support::design_of(in);
  const double l0 = lambda_max(LossKind::CAL1, d, in.t);
  const auto grid = LambdaGrid::make(l0, 1, 0);
  const auto cv = cross_validate(LossKind::CAL1, d, in.t, grid, 5, 7);
  EXPECT_EQ(cv.selected_lambda, l0);
  EXPECT_EQ(cv.selected_index, 0);
  EXPECT_TRUE(std::isfinite(cv.cv_values[0]));
}

TEST(CrossValidate, ModerateProblemSelectsBelowThreshold) {
  const auto in = oracle::random_instance(400, 20, 34, 0.8);
  const DesignMatrix d = testing_support::design_of(in);
  const auto grid = LambdaGrid::make(lambda_max(LossKind::CAL1, d, in.t));
  const auto cv = cross_validate(LossKind::CAL1, d, in.t, grid, 5, 2024);
  for (double v : cv.cv_values) EXPECT_TRUE(std::isfinite(v));
  EXPECT_LT(cv.selected_lambda, grid.lambda0);
  const auto again = cross_validate(LossKind::CAL1, d, in.t, grid, 5, 2024);
  EXPECT_EQ(cv.cv_values, again.cv_values);
}

TEST(CrossValidate, LeaveOneOutOnTinyData) {
  const auto in = oracle::random_instance(10, 1, 35);
  const DesignMatrix d = testing_support::design_of(in);
  const auto grid = LambdaGrid::make(lambda_max(LossKind::ML, d, in.t), 1, 4);
  const auto cv = cross_validate(LossKind::ML, d, in.t, grid, 10, 1);
  const std::set<double> members(grid.values.begin(), grid.values.end());
  EXPECT_TRUE(members.count(cv.selected_lambda));
  std::set<int> folds(cv.fold_assignment.begin(), cv.fold_assignment.end());
  EXPECT_EQ(folds.size(), 10u);
}

TEST(CrossValidate, HeldOutLossesMatchRecomputation) {
  const auto in = oracle::random_instance(120, 6, 36);
  const DesignMatrix d = testing_support::design_of(in);
  const auto grid = LambdaGrid::make(lambda_max(LossKind::CAL1, d, in.t), 1, 5);
  const auto cv = cross_validate(LossKind::CAL1, d, in.t, grid, 4, 99);
  double best = INFINITY;
  for (int k = 0; k < 4; ++k) {
    std::vector<Index> train, valid;
    for (Index i = 0; i < 120; ++i) (cv.fold_assignment[static_cast<std::size_t>(i)] == k ? valid : train).push_back(i);
    const DesignMatrix dt = d.subset_rows(train);
    const DesignMatrix dv = d.subset_rows(valid);
    Eigen::VectorXd tt(static_cast<Index>(train.size())), tv(static_cast<Index>(valid.size()));
    for (std::size_t i = 0; i < train.size(); ++i) tt[static_cast<Index>(i)] = in.t[train[i]];
    for (std::size_t i = 0; i < valid.size(); ++i) tv[static_cast<Index>(i)] = in.t[valid[i]];
    std::optional<Coefficients> warm;
    for (std::size_t l = 0; l < grid.values.size(); ++l) {
      const auto fit = fit_lasso(LossKind::CAL1, dt, tt, grid.values[l], {}, warm);
      ASSERT_TRUE(fit.converged());
      warm = fit.coef;
      // Validation loss touches only held-out rows.
      const double v = eval_loss(LossKind::CAL1, dv, tv, fit.coef).value;
      EXPECT_NEAR(cv.fold_values[l][static_cast<std::size_t>(k)], v, 1e-14);
    }
  }
  for (std::size_t l = 0; l < grid.values.size(); ++l) {
    double mean = 0.0;
    for (double v : cv.fold_values[l]) mean += v / 4.0;
    EXPECT_NEAR(cv.cv_values[l], mean, 1e-14);
    if (cv.cv_values[l] < best) best = cv.cv_values[l];
  }
  EXPECT_EQ(cv.cv_values[static_cast<std::size_t>(cv.selected_index)], best);
}

TEST(CrossValidate, AllFoldsFailingRaisesNoViableLambda) {
  Eigen::MatrixXd x(10, 1);
  x << 1, 2, 3, 4, 5, -1, -2, -3, -4, -5;
  Eigen::VectorXd t(10);
  t << 1, 1, 1, 1, 1, 0, 0, 0, 0, 0;
  const DesignMatrix d = testing_support::design_from(x);
  LambdaGrid grid;
  grid.lambda0 = 1e-12;
  grid.values = {0.0};
  grid.ratios = {0.0};
  try {
    cross_validate(LossKind::CAL1, d, t, grid, 5, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoViableLambda);
  }
}

TEST(FitPath, WarmStartedPathMatchesColdFits) {
  const auto in = oracle::random_instance(150, 8, 37);
  const DesignMatrix d = testing_support::design_of(in);
  const auto grid = LambdaGrid::make(lambda_max(LossKind::BAL, d, in.t), 2, 8);
  const auto path = fit_path(LossKind::BAL, d, in.t, grid);
  ASSERT_EQ(path.size(), grid.values.size());
  for (std::size_t l = 0; l < path.size(); l += 3) {
    const auto cold = fit_lasso(LossKind::BAL, d, in.t, grid.values[l]);
    EXPECT_NEAR(path[l].penalized_loss, cold.penalized_loss, 1e-10);
  }
}
