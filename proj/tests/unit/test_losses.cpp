#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "calps/error.hpp"
#include "calps/losses.hpp"
#include "helpers.hpp"

using namespace calps;
using testing_support::kKinds;

namespace {

DesignMatrix intercept_only(Index n) {
  return DesignMatrix::from_features(Eigen::MatrixXd(n, 0), {}, false);
}

}  // namespace

TEST(EvalLoss, Cal1InterceptOnlyExample) {
  const auto e = eval_loss(LossKind::CAL1, intercept_only(2), Eigen::Vector2d(1, 0), Coefficients::zeros(1));
  EXPECT_DOUBLE_EQ(e.value, 0.5);
  EXPECT_EQ(e.gradient[0], 0.0);
}

TEST(EvalLoss, MlScoreVanishesAtBalancedIntercept) {
  const auto e = eval_loss(LossKind::ML, intercept_only(4), Eigen::Vector4d(1, 0, 0, 1), Coefficients::zeros(1));
  EXPECT_EQ(e.gradient[0], 0.0);
  EXPECT_NEAR(e.value, std::log(2.0), 1e-15);
}

TEST(EvalLoss, BalIsExactSumOfCalibrationLosses) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto in = oracle::random_instance(30, 4, s);
    const DesignMatrix d = testing_support::design_of(in);
    const Coefficients c = Coefficients::from(Eigen::VectorXd::Random(5));
    const auto b = eval_loss(LossKind::BAL, d, in.t, c);
    const auto c1 = eval_loss(LossKind::CAL1, d, in.t, c);
    const auto c0 = eval_loss(LossKind::CAL0, d, in.t, c);
    EXPECT_EQ(b.value, c1.value + c0.value);
    EXPECT_TRUE(b.gradient.isApprox(c1.gradient + c0.gradient, 1e-15));
  }
}

TEST(EvalLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int s = 0; s < 25; ++s) {
    const int n = 6 + s % 15;
    const int p = 1 + s % 5;
    const auto in = oracle::random_instance(n, p, 100 + s);
    const DesignMatrix d = testing_support::design_of(in, false);
    Eigen::VectorXd gamma(p + 1);
    for (auto& v : gamma) v = u(rng);
    for (LossKind k : kKinds) {
      const auto fn = [&](const Eigen::VectorXd& x) {
        return eval_loss(k, d, in.t, Coefficients::from(x)).value;
      };
      const Eigen::VectorXd num = oracle::numeric_gradient(fn, gamma, 1e-6);
      const Eigen::VectorXd ana = eval_loss(k, d, in.t, Coefficients::from(gamma)).gradient;
      const double scale = std::max(1.0, ana.cwiseAbs().maxCoeff());
      EXPECT_LE((num - ana).cwiseAbs().maxCoeff() / scale, 1e-6) << to_string(k) << " seed " << s;
    }
  }
}

TEST(EvalLoss, AgreesWithOracle) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto in = oracle::random_instance(40, 3, 50 + s);
    const DesignMatrix d = testing_support::design_of(in, false);
    const Eigen::VectorXd gamma = 0.7 * Eigen::VectorXd::Random(4);
    for (LossKind k : kKinds) {
      const auto e = eval_loss(k, d, in.t, Coefficients::from(gamma));
      const auto ok = testing_support::to_oracle(k);
      EXPECT_NEAR(e.value, static_cast<double>(oracle::loss(ok, in.f, in.t, gamma)), 1e-13);
      EXPECT_LE((e.gradient - oracle::gradient(ok, in.f, in.t, gamma)).cwiseAbs().maxCoeff(), 1e-13);
    }
  }
}

TEST(EvalLoss, CurvatureWeightsArePositiveSemidefinite) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto in = oracle::random_instance(20, 5, 200 + s);
    const DesignMatrix d = testing_support::design_of(in);
    Eigen::VectorXd gamma(6);
    for (auto& v : gamma) v = 3.0 * z(rng);
    for (LossKind k : kKinds) {
      const auto e = eval_loss(k, d, in.t, Coefficients::from(gamma));
      EXPECT_GE(e.hessian_weights.minCoeff(), 0.0);
      const Eigen::MatrixXd h = d.values().transpose() * e.hessian_weights.asDiagonal() * d.values() / 20.0;
      for (int r = 0; r < 5; ++r) {
        Eigen::VectorXd b(6);
        for (auto& v : b) v = z(rng);
        EXPECT_GE(b.dot(h * b), -1e-12);
      }
    }
  }
}

TEST(EvalLoss, Cal1GradientIsNegatedCalibrationResidual) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto in = oracle::random_instance(25, 4, 300 + s);
    const DesignMatrix d = testing_support::design_of(in);
    const Coefficients c = Coefficients::from(Eigen::VectorXd::Random(5));
    const Eigen::VectorXd pi = propensity(linear_predictor(d, c));
    const Eigen::VectorXd r = in.t.cwiseQuotient(pi).array() - 1.0;
    const Eigen::VectorXd moment = d.values().transpose() * r / 25.0;
    const auto e = eval_loss(LossKind::CAL1, d, in.t, c);
    EXPECT_LE((e.gradient + moment).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(EvalLoss, OverflowFlagAndFiniteValues) {
  Eigen::MatrixXd x(2, 1);
  x << 1, -1;
  const DesignMatrix d = testing_support::design_from(x);
  for (LossKind k : kKinds) {
    const auto e = eval_loss(k, d, Eigen::Vector2d(1, 0), Coefficients::from(Eigen::Vector2d(0, 800)));
    EXPECT_TRUE(e.overflow);
    EXPECT_TRUE(std::isfinite(e.value));
    EXPECT_TRUE(e.gradient.allFinite());
  }
  EXPECT_FALSE(eval_loss(LossKind::CAL1, d, Eigen::Vector2d(1, 0), Coefficients::zeros(2)).overflow);
}

TEST(EvalLoss, DimensionMismatchThrows) {
  EXPECT_THROW(eval_loss(LossKind::ML, intercept_only(3), Eigen::Vector2d(1, 0), Coefficients::zeros(1)), Error);
  EXPECT_THROW(eval_loss(LossKind::ML, intercept_only(2), Eigen::Vector2d(1, 0), Coefficients::zeros(2)), Error);
}

TEST(LossChange, MatchesDirectDifferenceAndResolvesTinySteps) {
  const auto in = oracle::random_instance(60, 3, 9);
  const DesignMatrix d = testing_support::design_of(in);
  const Eigen::VectorXd g = linear_predictor(d, Coefficients::from(Eigen::Vector4d(0.2, -0.5, 0.3, 1.0)));
  const Eigen::VectorXd delta = linear_predictor(d, Coefficients::from(Eigen::Vector4d(0.1, 0.2, -0.1, 0.05)));
  for (LossKind k : kKinds) {
    const double direct = loss_value(k, g + delta, in.t) - loss_value(k, g, in.t);
    EXPECT_NEAR(loss_change(k, g, delta, in.t), direct, 1e-13);
    const Eigen::VectorXd tiny = 1e-12 * delta;
    const double slope = eval_loss_at(k, d.values(), in.t, g).gradient.dot(
        Eigen::Vector4d(0.1, 0.2, -0.1, 0.05) * 1e-12);
    EXPECT_NEAR(loss_change(k, g, tiny, in.t), slope, 1e-20);
  }
}

TEST(Divergences, Examples) {
  const auto same = divergences(0.3, 0.3);
  EXPECT_EQ(same.L, 0.0);
  EXPECT_EQ(same.K, 0.0);
  EXPECT_EQ(same.Q, 0.0);
  EXPECT_NEAR(divergences(0.5, 0.999).Q, 0.996004, 1e-12);
  // 0.99/0.5 - 1 - ln(1.98) evaluated directly.
  EXPECT_NEAR(divergences(0.5, 0.99).K, 0.98 - std::log(1.98), 1e-15);
  EXPECT_NEAR(divergences(0.5, 0.99).K, 0.29690315529355615, 1e-15);
}

TEST(Divergences, NonnegativeAndVanishOnlyOnDiagonal) {
  for (double r = 0.05; r < 1.0; r += 0.05) {
    for (double rp = 0.05; rp < 1.0; rp += 0.05) {
      const auto d = divergences(r, rp);
      EXPECT_GE(d.L, 0.0);
      EXPECT_GE(d.K, 0.0);
      EXPECT_GE(d.Q, 0.0);
      if (std::abs(r - rp) > 1e-9) {
        EXPECT_GT(d.L, 0.0);
        EXPECT_GT(d.K, 0.0);
        EXPECT_GT(d.Q, 0.0);
      }
    }
  }
}

TEST(Divergences, DomainErrors) {
  EXPECT_THROW(divergences(0.0, 0.5), Error);
  EXPECT_THROW(divergences(0.5, 1.0), Error);
  EXPECT_THROW(divergences(NAN, 0.5), Error);
}

TEST(QuadraticBound, BoundaryMargin) {
  EXPECT_NEAR(prop4_boundary_margin(0.5), 0.7 + std::log(0.5), 1e-15);
  EXPECT_NEAR(prop4_boundary_margin(0.5), 0.0069, 5e-5);
  for (double a = 0.001; a <= 0.5; a += 0.001) EXPECT_GT(prop4_boundary_margin(a), 0.0);
}

TEST(QuadraticBound, HoldsOnFullGrid) {
  int failures = 0;
  int points = 0;
  for (double a : {0.05, 0.1, 0.25, 0.5}) {
    for (int i = 1; i <= 99; ++i) {
      const double rp = i / 100.0;
      for (int k = 0;; ++k) {
        const double rho = a * rp + k * 0.001;
        if (rho >= 1.0) break;
        ++points;
        if (!prop4_bound_holds(rho, rp, a)) ++failures;
      }
    }
  }
  EXPECT_GT(points, 100000);
  EXPECT_EQ(failures, 0);
}

TEST(QuadraticBound, Examples) {
  EXPECT_TRUE(prop4_bound_holds(0.4, 0.4, 0.5));
  for (int i = 1; i <= 99; ++i) EXPECT_TRUE(prop4_bound_holds(0.25 * i / 100.0, i / 100.0, 0.25));
  EXPECT_THROW(prop4_bound_holds(0.1, 0.5, 0.5), Error);
  EXPECT_THROW(prop4_bound_holds(0.5, 0.5, 0.6), Error);
}

TEST(Bregman, Examples) {
  const Eigen::VectorXd t = Eigen::VectorXd::Ones(1);
  EXPECT_NEAR(empirical_bregman(BregmanKind::CAL, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), t),
              std::exp(-1.0), 1e-15);
  const auto in = oracle::random_instance(10, 2, 4);
  const Eigen::VectorXd g = in.f * Eigen::Vector3d(0.1, 0.5, -0.5);
  EXPECT_EQ(empirical_bregman(BregmanKind::ML, g, g, in.t), 0.0);
  EXPECT_EQ(empirical_bregman(BregmanKind::CAL, g, g, in.t), 0.0);
}

TEST(Bregman, DivergenceIdentities) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto in = oracle::random_instance(15, 3, 400 + s);
    const Eigen::VectorXd g = in.f * (0.8 * Eigen::VectorXd::Random(4));
    const Eigen::VectorXd gp = in.f * (0.8 * Eigen::VectorXd::Random(4));
    double ml = 0.0;
    double cal = 0.0;
    for (Index i = 0; i < 15; ++i) {
      const auto dv = divergences(propensity(g[i]), propensity(gp[i]));
      ml += dv.L;
      cal += in.t[i] / propensity(gp[i]) * (dv.K + dv.L);
    }
    EXPECT_NEAR(empirical_bregman(BregmanKind::ML, g, gp, in.t), ml / 15.0, 1e-12);
    EXPECT_NEAR(empirical_bregman(BregmanKind::CAL, g, gp, in.t), cal / 15.0, 1e-12);
    EXPECT_GE(empirical_bregman(BregmanKind::ML, g, gp, in.t), -1e-15);
    EXPECT_GT(empirical_bregman(BregmanKind::CAL, g, gp, in.t), 0.0);
  }
}

TEST(RiskMeasures, Examples) {
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  const auto r = risk_measures(Eigen::VectorXd::Constant(1, std::log(3.0)), Eigen::VectorXd::Zero(1), one);
  EXPECT_NEAR(r.mse, 0.125, 1e-15);
  EXPECT_NEAR(r.msre, 2.0 / 9.0, 1e-15);
  const auto z = risk_measures(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2), Eigen::Vector2d(1, 0));
  EXPECT_NEAR(z.kappa_ml, std::log(2.0), 1e-15);
  EXPECT_EQ(z.mse, 0.0);
  EXPECT_EQ(z.msre, 0.0);
}

TEST(RiskMeasures, TruthMinimizesExpectedRisks) {
  const auto in = oracle::random_instance(200, 3, 77);
  const Eigen::VectorXd gs = in.f * Eigen::Vector4d(0.2, 0.4, -0.3, 0.1);
  const auto at_truth = risk_measures(gs, gs, in.t);
  EXPECT_EQ(at_truth.mse, 0.0);
  EXPECT_EQ(at_truth.msre, 0.0);
  for (int k = 1; k <= 5; ++k) {
    const auto off = risk_measures(gs.array() + 0.1 * k, gs, in.t);
    EXPECT_GT(off.kappa_ml, at_truth.kappa_ml);
    EXPECT_GT(off.kappa_cal, at_truth.kappa_cal);
    EXPECT_GT(off.msre, 0.0);
  }
}

TEST(RiskMeasures, DomainErrorAtDegenerateTruth) {
  EXPECT_THROW(risk_measures(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 800.0),
                             Eigen::VectorXd::Ones(1)),
               Error);
}

TEST(MseBound, Examples) {
  EXPECT_NEAR(mse_bound(1.0, 0.1, 0.5, 100), 0.8, 1e-15);
  EXPECT_NEAR(mse_bound(3.0, 0.2, 0.0, 50), 2.0 * 3.0 / (50 * 0.2), 1e-15);
  for (double m = 0.01; m < 10.0; m *= 2) EXPECT_GE(mse_bound(2.0, 0.3, 2 * m, 40), mse_bound(2.0, 0.3, m, 40));
  EXPECT_THROW(mse_bound(1.0, 1.0, 0.5, 10), Error);
  EXPECT_THROW(mse_bound(1.0, 0.0, 0.5, 10), Error);
}

TEST(LossKindText, RoundTrip) {
  for (LossKind k : kKinds) EXPECT_EQ(parse_loss_kind(to_string(k)), k);
  EXPECT_EQ(parse_loss_kind("CAL"), LossKind::CAL1);
  EXPECT_THROW(parse_loss_kind("probit"), Error);
}
