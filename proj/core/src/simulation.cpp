#include "calps/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <thread>

#include <boost/math/distributions/normal.hpp>

#include "calps/error.hpp"
#include "calps/estimators.hpp"
#include "calps/numeric.hpp"
#include "calps/rng.hpp"
#include "calps/tuning.hpp"

namespace calps {

namespace {

constexpr std::uint32_t kStreamX = 1;
constexpr std::uint32_t kStreamT = 2;
constexpr std::uint32_t kStreamEps = 3;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string lower(std::string_view text) {
  std::string s(text);
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> numbered(const char* prefix, Index from, Index to) {
  std::vector<std::string> names;
  for (Index j = from; j <= to; ++j) names.push_back(prefix + std::to_string(j));
  return names;
}

double sq(double x) { return x * x; }

double root_mean_square(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  Eigen::VectorXd s(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) s[static_cast<Index>(i)] = sq(v[i]);
  return std::sqrt(pairwise_mean(s));
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  return pairwise_mean(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size())));
}

Index count_nonzero(const Eigen::VectorXd& gamma, Index first, Index last) {
  Index k = 0;
  for (Index j = first; j <= std::min(last, gamma.size() - 1); ++j) k += gamma[j] != 0.0;
  return k;
}

void score(const SimReplicate& rep, const Eigen::VectorXd& g_hat, EstimatorOutcome& out) {
  const Index n = rep.treatment.size();
  const Eigen::VectorXd pi = propensity(g_hat);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    if (rep.treatment[i] == 1.0) w[i] = 1.0 / pi[i];
  }
  const double denom = pairwise_sum(w);
  Eigen::VectorXd num(n);
  for (std::size_t k = 0; k < kAllHConfigs.size(); ++k) {
    for (Index i = 0; i < n; ++i) {
      if (w[i] == 0.0) {
        num[i] = 0.0;
      } else if (kAllHConfigs[k] == HConfig::Noise) {
        num[i] = w[i] * rep.epsilon[i];
      } else {
        num[i] = w[i] * h_function(kAllHConfigs[k], rep.X.row(i));
      }
    }
    out.mu[k] = pairwise_sum(num) / denom;
  }
  const RiskMeasures rm = risk_measures(g_hat, rep.g_star, rep.treatment);
  out.kappa_ml = rm.kappa_ml;
  out.kappa_cal = rm.kappa_cal;
  out.mse = rm.mse;
  out.msre = rm.msre;
}

void fail(EstimatorOutcome& out, FitStatus status) {
  out.converged = false;
  out.status = status;
  out.mu.fill(kNaN);
  out.kappa_ml = out.kappa_cal = out.mse = out.msre = kNaN;
}

}  // namespace

std::string_view to_string(Scenario s) noexcept {
  return s == Scenario::CorrectlySpecified ? "correct" : "misspecified";
}

std::string_view to_string(HConfig h) noexcept {
  switch (h) {
    case HConfig::Lin1: return "lin1";
    case HConfig::Lin2: return "lin2";
    case HConfig::Quad1: return "quad1";
    case HConfig::Quad2: return "quad2";
    case HConfig::Exp: return "exp";
    case HConfig::Noise: return "noise";
  }
  return "unknown";
}

std::string_view to_string(SimEstimator e) noexcept {
  switch (e) {
    case SimEstimator::True: return "True";
    case SimEstimator::Const: return "Const";
    case SimEstimator::ML: return "ML";
    case SimEstimator::RML: return "RML";
    case SimEstimator::CAL: return "CAL";
    case SimEstimator::RCAL: return "RCAL";
  }
  return "unknown";
}

Scenario parse_scenario(std::string_view text) {
  const std::string s = lower(text);
  if (s == "correct" || s == "i" || s == "1") return Scenario::CorrectlySpecified;
  if (s == "misspecified" || s == "ii" || s == "2") return Scenario::Misspecified;
  throw Error(ErrorCode::InvalidArgument, "unknown scenario '" + std::string(text) + "'");
}

HConfig parse_h_config(std::string_view text) {
  const std::string s = lower(text);
  for (HConfig h : kAllHConfigs) {
    if (s == to_string(h)) return h;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown h configuration '" + std::string(text) + "'");
}

SimEstimator parse_estimator(std::string_view text) {
  const std::string s = lower(text);
  for (SimEstimator e : kAllEstimators) {
    if (s == lower(to_string(e))) return e;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown estimator '" + std::string(text) + "'");
}

double h_function(HConfig h, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  switch (h) {
    case HConfig::Lin1: return x[0] + 0.5 * x[1] + 0.5 * x[2] + 0.5 * x[3];
    case HConfig::Lin2: return x[0] + 2.0 * x[1] + 2.0 * x[2] + 2.0 * x[3];
    case HConfig::Quad1: {
      double s = 0.0;
      for (int j = 0; j < 4; ++j) s += sq(std::max(x[j], 0.0));
      return s;
    }
    case HConfig::Quad2: {
      double s = 0.0;
      for (int j = 0; j < 4; ++j) s += sq(std::max(-x[j], 0.0));
      return s;
    }
    case HConfig::Exp: {
      double s = 0.0;
      for (int j = 0; j < 4; ++j) s += std::exp(x[j] / 2.0);
      return s;
    }
    case HConfig::Noise: return 0.0;
  }
  return 0.0;
}

double h_expectation(HConfig h) noexcept {
  switch (h) {
    case HConfig::Quad1:
    case HConfig::Quad2: return 2.0;
    case HConfig::Exp: return 4.0 * std::exp(0.125);
    default: return 0.0;
  }
}

double h_expectation_mc(HConfig h, Index draws, std::uint64_t seed) {
  PhiloxStream rng(seed, kStreamX);
  Eigen::VectorXd values(draws);
  Eigen::RowVectorXd x(4);
  for (Index i = 0; i < draws; ++i) {
    for (int j = 0; j < 4; ++j) x[j] = rng.normal();
    values[i] = h_function(h, x);
  }
  return pairwise_mean(values);
}

void SimConfig::validate() const {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "n must be at least 2");
  if (p < 4) throw Error(ErrorCode::InvalidArgument, "p must be at least 4");
  if (n_reps < 1) throw Error(ErrorCode::InvalidArgument, "n_reps must be at least 1");
  if (estimators.empty()) throw Error(ErrorCode::InvalidArgument, "no estimators selected");
  if (cv_folds < 2 || cv_folds > n) throw Error(ErrorCode::InvalidArgument, "cv_folds must lie in [2, n]");
  if (grid_subdiv < 1) throw Error(ErrorCode::InvalidArgument, "grid_subdiv must be >= 1");
  if (grid_depth < 0) throw Error(ErrorCode::InvalidArgument, "grid_depth must be >= 0");
  if (threads < 0) throw Error(ErrorCode::InvalidArgument, "threads must be >= 0");
  solver.validate();
}

Eigen::VectorXd true_log_odds(const Eigen::MatrixXd& X) {
  return X.col(0) - 0.5 * X.col(1) + 0.25 * X.col(2) + 0.1 * X.col(3);
}

Eigen::MatrixXd kang_schafer_transforms(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd W = X;
  for (Index i = 0; i < X.rows(); ++i) {
    const double x1 = X(i, 0), x2 = X(i, 1), x3 = X(i, 2), x4 = X(i, 3);
    W(i, 0) = std::exp(0.5 * x1);
    W(i, 1) = 10.0 + x2 / (1.0 + std::exp(x1));
    W(i, 2) = std::pow(0.04 * x1 * x3 + 0.6, 3);
    W(i, 3) = sq(x2 + x4 + 20.0);
  }
  return W;
}

SimReplicate generate_replicate(const SimConfig& config, std::uint64_t rep_seed) {
  config.validate();
  const Index n = config.n;
  const Index p = config.p;
  SimReplicate rep;
  PhiloxStream xs(rep_seed, kStreamX);
  rep.X.resize(n, p);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) rep.X(i, j) = xs.normal();
  }
  rep.g_star = -true_log_odds(rep.X);
  rep.pi_star = propensity(rep.g_star);
  PhiloxStream ts(rep_seed, kStreamT);
  rep.treatment.resize(n);
  for (Index i = 0; i < n; ++i) rep.treatment[i] = ts.uniform() < rep.pi_star[i] ? 1.0 : 0.0;
  PhiloxStream es(rep_seed, kStreamEps);
  rep.epsilon.resize(n);
  for (Index i = 0; i < n; ++i) rep.epsilon[i] = es.normal();

  if (config.scenario == Scenario::CorrectlySpecified) {
    rep.design = DesignMatrix::from_features(rep.X, numbered("x", 1, p), false);
  } else {
    std::vector<std::string> names = numbered("w", 1, 4);
    for (const auto& s : numbered("x", 5, p)) names.push_back(s);
    rep.design = DesignMatrix::from_features(kang_schafer_transforms(rep.X), std::move(names), true);
  }
  return rep;
}

ReplicateRecord run_replicate(const SimConfig& config, int rep_index) {
  ReplicateRecord record;
  record.rep = rep_index;
  record.seed = derive_seed(config.seed, static_cast<std::uint64_t>(rep_index));
  const SimReplicate rep = generate_replicate(config, record.seed);
  {
    const RiskMeasures star = risk_measures(rep.g_star, rep.g_star, rep.treatment);
    record.kappa_ml_star = star.kappa_ml;
    record.kappa_cal_star = star.kappa_cal;
  }
  const Index n = config.n;

  for (SimEstimator est : config.estimators) {
    EstimatorOutcome out;
    try {
      switch (est) {
        case SimEstimator::True:
          out.nonzero = 4;
          out.nonzero_first4 = 4;
          score(rep, rep.g_star, out);
          break;
        case SimEstimator::Const:
          score(rep, Eigen::VectorXd::Constant(n, logit(treated_fraction(rep.treatment))), out);
          break;
        case SimEstimator::ML:
        case SimEstimator::CAL: {
          const LossKind kind = est == SimEstimator::ML ? LossKind::ML : LossKind::CAL1;
          const FitResult fit = fit_unpenalized(kind, rep.design, rep.treatment, config.solver);
          out.status = fit.status;
          if (!fit.converged()) {
            fail(out, fit.status);
            break;
          }
          out.nonzero = fit.coef.nonzero_count();
          out.nonzero_first4 = count_nonzero(fit.coef.gamma, 1, 4);
          score(rep, rep.design.values() * fit.coef.gamma, out);
          break;
        }
        case SimEstimator::RML:
        case SimEstimator::RCAL: {
          const LossKind kind = est == SimEstimator::RML ? LossKind::ML : LossKind::CAL1;
          const LambdaGrid grid = LambdaGrid::make(lambda_max(kind, rep.design, rep.treatment),
                                                   config.grid_subdiv, config.grid_depth);
          const std::uint64_t cv_seed = derive_seed(record.seed, est == SimEstimator::RML ? 1 : 2);
          const CvResult cv =
              cross_validate(kind, rep.design, rep.treatment, grid, config.cv_folds, cv_seed, config.solver);
          LambdaGrid head = grid;
          head.values.resize(static_cast<std::size_t>(cv.selected_index) + 1);
          head.ratios.resize(head.values.size());
          const std::vector<FitResult> path = fit_path(kind, rep.design, rep.treatment, head, config.solver);
          const FitResult& fit = path.back();
          out.lambda = fit.lambda;
          out.status = fit.status;
          if (!fit.converged()) {
            fail(out, fit.status);
            break;
          }
          out.nonzero = fit.coef.nonzero_count();
          out.nonzero_first4 = count_nonzero(fit.coef.gamma, 1, 4);
          score(rep, rep.design.values() * fit.coef.gamma, out);
          break;
        }
      }
    } catch (const Error&) {
      fail(out, FitStatus::IterationLimit);
    }
    record.outcomes.push_back(out);
  }
  return record;
}

std::vector<EstimatorSummary> summarize(const SimConfig& config,
                                        const std::vector<ReplicateRecord>& replicates) {
  std::vector<EstimatorSummary> rows;
  for (std::size_t e = 0; e < config.estimators.size(); ++e) {
    EstimatorSummary s;
    s.estimator = config.estimators[e];
    std::array<std::vector<double>, 6> err;
    std::vector<double> rml, rcal, mse, msre, nz, nz4;
    for (const ReplicateRecord& r : replicates) {
      const EstimatorOutcome& o = r.outcomes[e];
      if (!o.converged) {
        ++s.nonconverged;
        continue;
      }
      ++s.included;
      for (std::size_t k = 0; k < kAllHConfigs.size(); ++k) {
        err[k].push_back(o.mu[k] - h_expectation(kAllHConfigs[k]));
      }
      rml.push_back(o.kappa_ml - r.kappa_ml_star);
      rcal.push_back(o.kappa_cal - r.kappa_cal_star);
      mse.push_back(o.mse);
      msre.push_back(o.msre);
      nz.push_back(static_cast<double>(o.nonzero));
      nz4.push_back(static_cast<double>(o.nonzero_first4));
    }
    for (std::size_t k = 0; k < kAllHConfigs.size(); ++k) s.rmse[k] = root_mean_square(err[k]);
    s.risk_ml = root_mean_square(rml);
    s.risk_cal = root_mean_square(rcal);
    s.diff = root_mean_square(mse);
    s.rdiff = root_mean_square(msre);
    s.mean_nonzero = mean_of(nz);
    s.mean_nonzero_first4 = mean_of(nz4);
    rows.push_back(s);
  }
  return rows;
}

MetricTable run_monte_carlo(const SimConfig& config) {
  config.validate();
  MetricTable table;
  table.config = config;
  table.replicates.resize(static_cast<std::size_t>(config.n_reps));

  unsigned workers = config.threads > 0 ? static_cast<unsigned>(config.threads)
                                        : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(config.n_reps));
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](unsigned id) {
    try {
      for (int r = next++; r < config.n_reps; r = next++) {
        table.replicates[static_cast<std::size_t>(r)] = run_replicate(config, r);
      }
    } catch (...) {
      errors[id] = std::current_exception();
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned id = 0; id < workers; ++id) pool.emplace_back(work, id);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  table.rows = summarize(config, table.replicates);
  return table;
}

FitResult limiting_fit(LossKind kind, const DesignMatrix& design, const Eigen::VectorXd& pi_star,
                       const SolverConfig& config) {
  for (Index i = 0; i < pi_star.size(); ++i) {
    if (!(pi_star[i] > 0.0 && pi_star[i] < 1.0)) {
      throw Error(ErrorCode::DomainError, "limiting propensities must lie in (0, 1)");
    }
  }
  return fit_unpenalized(kind, design, pi_star, config);
}

LimitingDesign limiting_design(Index n) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "need at least two design points");
  const boost::math::normal_distribution<double> normal;
  LimitingDesign s;
  s.x.resize(n);
  for (Index i = 0; i < n; ++i) {
    s.x[i] = boost::math::quantile(normal, static_cast<double>(i + 1) / static_cast<double>(n + 1));
  }
  s.g_star = -s.x;
  s.pi_star = propensity(s.g_star);
  const Eigen::MatrixXd w = (s.x.array() / 2.0).exp().matrix();
  s.design = DesignMatrix::from_features(w, {"w"}, false);
  return s;
}

std::vector<LimitingSummary> limiting_experiment(const LimitingDesign& setup, const SolverConfig& config) {
  std::vector<LimitingSummary> out;
  for (LossKind kind : {LossKind::ML, LossKind::CAL1, LossKind::BAL}) {
    FitResult fit = limiting_fit(kind, setup.design, setup.pi_star, config);
    const RiskMeasures rm =
        risk_measures(setup.design.values() * fit.coef.gamma, setup.g_star, setup.pi_star);
    out.push_back({kind, std::move(fit), rm.mse, rm.msre});
  }
  return out;
}

}  // namespace calps
