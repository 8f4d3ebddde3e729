#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "calps/csv.hpp"
#include "calps/data.hpp"
#include "calps/error.hpp"
#include "calps/estimators.hpp"
#include "calps/losses.hpp"
#include "calps/simulation.hpp"
#include "calps/solver.hpp"
#include "calps/tuning.hpp"

namespace calps::cli {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

struct DataOptions {
  std::string input;
  std::string treatment = "T";
  std::string outcome;
  std::vector<std::string> covariates;
  std::vector<std::string> terms;
  bool interactions = false;
  bool standardize = true;
  int min_nonzero = 0;
};

struct SolverOptions {
  std::string surrogate = "q3";
  int max_iter = 1000;
  double kkt_tol = 1e-8;
  double outer_tol = 1e-9;
};

struct GridOptions {
  int folds = 5;
  int depth = 10;
  int subdiv = 1;
  std::uint64_t seed = 1;
};

struct Loaded {
  Dataset data;
  DesignMatrix design;
};

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

void add_data_options(CLI::App* app, DataOptions& o, bool need_outcome) {
  app->add_option("-i,--input", o.input, "CSV file with a header row")->required()->check(CLI::ExistingFile);
  app->add_option("--treatment", o.treatment, "Treatment column (0/1)")->capture_default_str();
  auto* y = app->add_option("--outcome", o.outcome, "Outcome column");
  if (need_outcome) y->required();
  app->add_option("--covariates", o.covariates, "Covariate columns (default: all others)")->delimiter(',');
  app->add_option("--term", o.terms, "Design term: col, a:b, or op(col) with op in square,cube,log,exp,sqrt");
  app->add_flag("--interactions", o.interactions, "Add all pairwise interactions of the covariates");
  app->add_flag("--standardize,!--no-standardize", o.standardize, "Standardize design columns")
      ->capture_default_str();
  app->add_option("--min-nonzero", o.min_nonzero, "Drop columns with fewer nonzero raw values")
      ->check(CLI::NonNegativeNumber);
}

void add_solver_options(CLI::App* app, SolverOptions& o) {
  app->add_option("--surrogate", o.surrogate, "Quadratic surrogate: q2 or q3")
      ->check(CLI::IsMember({"q2", "q3"}, CLI::ignore_case))
      ->capture_default_str();
  app->add_option("--max-iter", o.max_iter, "Outer iteration limit")->check(CLI::PositiveNumber);
  app->add_option("--kkt-tol", o.kkt_tol, "KKT tolerance")->check(CLI::PositiveNumber);
  app->add_option("--outer-tol", o.outer_tol, "Relative objective decrease tolerance")
      ->check(CLI::PositiveNumber);
}

void add_grid_options(CLI::App* app, GridOptions& o) {
  app->add_option("--cv-folds", o.folds, "Cross-validation folds")->check(CLI::Range(2, 1000000));
  app->add_option("--grid-depth", o.depth, "Grid depth J")->check(CLI::NonNegativeNumber);
  app->add_option("--grid-subdiv", o.subdiv, "Grid subdivision m")->check(CLI::PositiveNumber);
  app->add_option("--seed", o.seed, "Random seed");
}

SolverConfig solver_config(const SolverOptions& o) {
  SolverConfig c;
  c.surrogate = o.surrogate == "q2" || o.surrogate == "Q2" ? Surrogate::Q2 : Surrogate::Q3;
  c.max_outer_iters = o.max_iter;
  c.kkt_tol = o.kkt_tol;
  c.outer_tol = o.outer_tol;
  c.validate();
  return c;
}

Term parse_term(const std::string& text) {
  if (const auto colon = text.find(':'); colon != std::string::npos) {
    return Interaction{text.substr(0, colon), text.substr(colon + 1)};
  }
  if (const auto open = text.find('('); open != std::string::npos && text.back() == ')') {
    const std::string op = text.substr(0, open);
    const std::string col = text.substr(open + 1, text.size() - open - 2);
    if (op == "square") return Transform{UnaryOp::Square, col};
    if (op == "cube") return Transform{UnaryOp::Cube, col};
    if (op == "log") return Transform{UnaryOp::Log, col};
    if (op == "exp") return Transform{UnaryOp::Exp, col};
    if (op == "sqrt") return Transform{UnaryOp::Sqrt, col};
    throw Error(ErrorCode::InvalidArgument, "unknown transform '" + op + "'");
  }
  return MainEffect{text};
}

Loaded load(const DataOptions& o) {
  const CsvTable table = read_csv(o.input);
  std::optional<std::string> outcome;
  if (!o.outcome.empty()) outcome = o.outcome;
  Dataset data = dataset_from_csv(table, o.treatment, outcome, o.covariates);
  DesignSpec spec;
  if (!o.terms.empty()) {
    for (const auto& t : o.terms) spec.terms.push_back(parse_term(t));
    spec.standardize = o.standardize;
  } else if (o.interactions) {
    spec = DesignSpec::main_and_pairwise(data.covariate_names(), o.standardize);
  } else {
    spec = DesignSpec::main_effects(data.covariate_names(), o.standardize);
  }
  spec.min_nonzero_count = o.min_nonzero;
  DesignMatrix design = build_design(data, spec);
  return {std::move(data), std::move(design)};
}

Eigen::VectorXd read_pi(const std::string& path, Index n) {
  const CsvTable t = read_csv(path);
  const std::size_t col = t.column("pi_hat");
  if (static_cast<Index>(t.rows.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch, "'" + path + "' has " + std::to_string(t.rows.size()) +
                                                  " rows, expected " + std::to_string(n));
  }
  Eigen::VectorXd pi(n);
  for (Index i = 0; i < n; ++i) pi[i] = parse_number(t.rows[static_cast<std::size_t>(i)][col]);
  return pi;
}

std::string pi_csv(const Eigen::VectorXd& pi) {
  std::string s = "row,pi_hat\n";
  for (Index i = 0; i < pi.size(); ++i) s += std::to_string(i + 1) + "," + format_double(pi[i]) + "\n";
  return s;
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    atomic_write(path, text);
  }
}

json fit_json(const FitResult& fit, const DesignMatrix& design) {
  const auto& names = design.column_names();
  json coef = json::object();
  for (Index j = 0; j < fit.coef.size(); ++j) coef[names[static_cast<std::size_t>(j)]] = num(fit.coef.gamma[j]);
  json box = json::object();
  for (Index j = 0; j < fit.kkt.box_residuals.size(); ++j) {
    box[names[static_cast<std::size_t>(j + 1)]] = num(fit.kkt.box_residuals[j]);
  }
  json active = json::array();
  for (Index j : fit.kkt.active_set) active.push_back(names[static_cast<std::size_t>(j)]);
  json r;
  r["loss"] = std::string(to_string(fit.kind));
  r["lambda"] = num(fit.lambda);
  r["status"] = std::string(to_string(fit.status));
  r["converged"] = fit.converged();
  r["iterations"] = fit.iterations;
  r["loss_value"] = num(fit.loss);
  r["penalized_loss"] = num(fit.penalized_loss);
  r["coefficients"] = coef;
  r["nonzero_count"] = fit.coef.nonzero_count();
  r["kkt"] = {{"intercept_residual", num(fit.kkt.intercept_residual)},
              {"max_abs_box", num(fit.kkt.max_abs_box)},
              {"stationarity", num(fit.kkt.stationarity)},
              {"active_set", active},
              {"box_residuals", box}};
  r["rank_deficient"] = fit.rank_deficient;
  r["overflow"] = fit.overflow;
  json dropped = json::array();
  for (const auto& d : design.dropped()) dropped.push_back(d);
  r["design"] = {{"n", design.rows()},
                 {"p", design.num_features()},
                 {"standardized", design.standardized()},
                 {"center", vec(design.center())},
                 {"scale", vec(design.scale())},
                 {"dropped", dropped}};
  return r;
}

json cv_json(const CvResult& cv) {
  json j;
  j["lambda0"] = num(cv.grid.lambda0);
  j["grid_subdiv"] = cv.grid.subdiv;
  j["grid_depth"] = cv.grid.depth;
  json lambdas = json::array();
  json values = json::array();
  for (std::size_t l = 0; l < cv.grid.values.size(); ++l) {
    lambdas.push_back(num(cv.grid.values[l]));
    values.push_back(num(cv.cv_values[l]));
  }
  j["lambdas"] = lambdas;
  j["cv_values"] = values;
  j["selected_lambda"] = num(cv.selected_lambda);
  j["selected_index"] = cv.selected_index;
  j["folds"] = cv.folds;
  j["seed"] = cv.seed;
  j["fold_assignment"] = cv.fold_assignment;
  return j;
}

struct CvFit {
  CvResult cv;
  FitResult fit;
};

CvFit cv_fit(LossKind kind, const DesignMatrix& design, const Eigen::VectorXd& t, const GridOptions& g,
             const SolverConfig& config) {
  const LambdaGrid grid = LambdaGrid::make(lambda_max(kind, design, t), g.subdiv, g.depth);
  CvResult cv = cross_validate(kind, design, t, grid, g.folds, g.seed, config);
  LambdaGrid head = grid;
  head.values.resize(static_cast<std::size_t>(cv.selected_index) + 1);
  head.ratios.resize(head.values.size());
  std::vector<FitResult> path = fit_path(kind, design, t, head, config);
  return {std::move(cv), std::move(path.back())};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---- subcommands ---------------------------------------------------------

struct FitCmd {
  DataOptions data;
  SolverOptions solver;
  std::string loss = "cal1";
  std::optional<double> lambda;
  std::string output;
  std::string pi_output;
};

int cmd_fit(const FitCmd& c, std::ostream& out) {
  const Loaded in = load(c.data);
  const LossKind kind = parse_loss_kind(c.loss);
  const SolverConfig config = solver_config(c.solver);
  const Eigen::VectorXd& t = in.data.treatment();
  const FitResult fit = c.lambda ? fit_lasso(kind, in.design, t, *c.lambda, config)
                                 : fit_unpenalized(kind, in.design, t, config);
  json r = fit_json(fit, in.design);
  r["lambda_max"] = num(lambda_max(kind, in.design, t));
  emit(c.output, dump(r), out);
  if (!c.pi_output.empty()) atomic_write(c.pi_output, pi_csv(fit.pi_hat));
  return fit.converged() ? 0 : 2;
}

struct CvCmd {
  DataOptions data;
  SolverOptions solver;
  GridOptions grid;
  std::string loss = "cal1";
  std::string output;
  std::string pi_output;
};

int cmd_cv(const CvCmd& c, std::ostream& out) {
  const Loaded in = load(c.data);
  const LossKind kind = parse_loss_kind(c.loss);
  const CvFit r = cv_fit(kind, in.design, in.data.treatment(), c.grid, solver_config(c.solver));
  json j;
  j["cv"] = cv_json(r.cv);
  j["fit"] = fit_json(r.fit, in.design);
  emit(c.output, dump(j), out);
  if (!c.pi_output.empty()) atomic_write(c.pi_output, pi_csv(r.fit.pi_hat));
  return r.fit.converged() ? 0 : 2;
}

struct ArmFits {
  Eigen::VectorXd pi_treated;
  Eigen::VectorXd pi_untreated;
  json fits = json::object();
  bool converged = true;
};

/// Fitted propensities for the treated and untreated orientations.
ArmFits arm_fits(const Loaded& in, const std::string& family, const std::optional<double>& lambda,
                 bool unpenalized, const GridOptions& grid, const SolverConfig& config) {
  LossKind k1, k0;
  if (family == "cal") {
    k1 = LossKind::CAL1;
    k0 = LossKind::CAL0;
  } else if (family == "ml") {
    k1 = k0 = LossKind::ML;
  } else if (family == "bal") {
    k1 = k0 = LossKind::BAL;
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown loss family '" + family + "'");
  }
  const Eigen::VectorXd& t = in.data.treatment();
  ArmFits r;
  auto one = [&](LossKind kind, const char* label) {
    json entry;
    FitResult fit;
    if (unpenalized) {
      fit = fit_unpenalized(kind, in.design, t, config);
    } else if (lambda) {
      fit = fit_lasso(kind, in.design, t, *lambda, config);
    } else {
      CvFit cf = cv_fit(kind, in.design, t, grid, config);
      entry["cv"] = cv_json(cf.cv);
      fit = std::move(cf.fit);
    }
    entry["fit"] = fit_json(fit, in.design);
    r.fits[label] = entry;
    r.converged = r.converged && fit.converged();
    return fit.pi_hat;
  };
  r.pi_treated = one(k1, "treated");
  r.pi_untreated = k0 == k1 ? r.pi_treated : one(k0, "untreated");
  return r;
}

struct EstimateCmd {
  DataOptions data;
  SolverOptions solver;
  GridOptions grid;
  std::string family = "cal";
  std::optional<double> lambda;
  bool unpenalized = false;
  std::string pi_treated;
  std::string pi_untreated;
  std::string output;
};

int cmd_estimate(const EstimateCmd& c, std::ostream& out) {
  const Loaded in = load(c.data);
  if (!in.data.outcome()) throw Error(ErrorCode::InvalidArgument, "estimate needs --outcome");
  const Eigen::VectorXd& t = in.data.treatment();
  const Eigen::VectorXd& y = *in.data.outcome();
  ArmFits arms;
  if (!c.pi_treated.empty()) {
    arms.pi_treated = read_pi(c.pi_treated, in.data.n());
    arms.pi_untreated = c.pi_untreated.empty() ? arms.pi_treated : read_pi(c.pi_untreated, in.data.n());
  } else {
    arms = arm_fits(in, c.family, c.lambda, c.unpenalized, c.grid, solver_config(c.solver));
  }
  const EstimateReport e = make_estimate_report(in.design, t, y, arms.pi_treated, arms.pi_untreated);
  json j;
  j["mu1_ipw"] = num(e.mu1_ipw);
  j["mu1_ripw"] = num(e.mu1_ripw);
  j["mu0_ipw"] = num(e.mu0_ipw);
  j["mu0_ripw"] = num(e.mu0_ripw);
  j["ate"] = num(e.ate);
  j["se_mu1"] = num(e.se_mu1);
  j["se_mu0"] = num(e.se_mu0);
  j["se_ate"] = num(e.se_ate);
  if (e.att) {
    j["nu1"] = num(e.att->nu1);
    j["nu0_ipw"] = num(e.att->nu0_ipw);
    j["nu0_ripw"] = num(e.att->nu0_ripw);
    j["att"] = num(e.att->att);
  }
  json bal = json::object();
  const auto& names = in.design.column_names();
  for (Index k = 0; k < e.balance_treated.size(); ++k) {
    bal[names[static_cast<std::size_t>(k + 1)]] = {{"treated", num(e.balance_treated[k])},
                                                   {"untreated", num(e.balance_untreated[k])}};
  }
  j["balance"] = bal;
  j["relvar_treated"] = num(e.relvar_treated);
  j["relvar_untreated"] = num(e.relvar_untreated);
  if (!arms.fits.empty()) j["fits"] = arms.fits;
  emit(c.output, dump(j), out);
  return arms.converged ? 0 : 2;
}

struct DiagnoseCmd {
  DataOptions data;
  SolverOptions solver;
  std::string loss = "cal1";
  std::optional<double> lambda;
  std::string pi;
  std::string output;
};

int cmd_diagnose(const DiagnoseCmd& c, std::ostream& out) {
  const Loaded in = load(c.data);
  const Eigen::VectorXd& t = in.data.treatment();
  Eigen::VectorXd pi;
  std::optional<FitResult> fit;
  if (!c.pi.empty()) {
    pi = read_pi(c.pi, in.data.n());
  } else {
    const LossKind kind = parse_loss_kind(c.loss);
    const SolverConfig config = solver_config(c.solver);
    fit = c.lambda ? fit_lasso(kind, in.design, t, *c.lambda, config)
                   : fit_unpenalized(kind, in.design, t, config);
    pi = fit->pi_hat;
  }
  const Eigen::VectorXd cal1 = std_calibration_diff(in.design, t, pi, Orientation::Treated);
  const Eigen::VectorXd cal0 = std_calibration_diff(in.design, t, pi, Orientation::Untreated);
  const auto& names = in.design.column_names();
  json cols = json::array();
  for (Index k = 0; k < cal1.size(); ++k) {
    json row = {{"name", names[static_cast<std::size_t>(k + 1)]},
                {"cal_treated", num(cal1[k])},
                {"cal_untreated", num(cal0[k])}};
    if (fit) row["active"] = fit->coef.gamma[k + 1] != 0.0;
    cols.push_back(row);
  }
  json j;
  j["columns"] = cols;
  j["max_abs_cal_treated"] = num(cal1.size() ? cal1.cwiseAbs().maxCoeff() : 0.0);
  j["max_abs_cal_untreated"] = num(cal0.size() ? cal0.cwiseAbs().maxCoeff() : 0.0);
  const Eigen::VectorXd w1 = arm_weights(t, pi, Orientation::Treated);
  const Eigen::VectorXd w0 = arm_weights(t, pi, Orientation::Untreated);
  j["relvar_treated"] = w1.size() >= 2 ? num(relative_variance(w1)) : json(nullptr);
  j["relvar_untreated"] = w0.size() >= 2 ? num(relative_variance(w0)) : json(nullptr);
  if (fit) {
    j["nonzero_count"] = fit->coef.nonzero_count();
    j["fit"] = fit_json(*fit, in.design);
  }
  emit(c.output, dump(j), out);
  return !fit || fit->converged() ? 0 : 2;
}

struct SimulateCmd {
  Index n = 200;
  Index p = 4;
  std::string scenario = "correct";
  int reps = 100;
  std::vector<std::string> estimators{"True", "Const", "ML", "RML", "CAL", "RCAL"};
  GridOptions grid;
  int threads = 1;
  SolverOptions solver;
  std::string output_dir;
};

std::string aggregate_csv(const MetricTable& t) {
  std::string s = "estimator,included,nonconverged";
  for (HConfig h : kAllHConfigs) s += ",rmse_" + std::string(to_string(h));
  s += ",risk_ml,risk_cal,diff,rdiff,mean_nonzero,mean_nonzero_first4\n";
  for (const auto& r : t.rows) {
    s += std::string(to_string(r.estimator)) + "," + std::to_string(r.included) + "," +
         std::to_string(r.nonconverged);
    for (double v : r.rmse) s += "," + format_double(v);
    for (double v : {r.risk_ml, r.risk_cal, r.diff, r.rdiff, r.mean_nonzero, r.mean_nonzero_first4}) {
      s += "," + format_double(v);
    }
    s += "\n";
  }
  return s;
}

std::string replicates_csv(const MetricTable& t) {
  std::string s = "rep,seed,estimator,converged,status,lambda";
  for (HConfig h : kAllHConfigs) s += ",mu_" + std::string(to_string(h));
  s += ",kappa_ml,kappa_cal,mse,msre,nonzero,nonzero_first4\n";
  for (const auto& r : t.replicates) {
    for (std::size_t e = 0; e < r.outcomes.size(); ++e) {
      const EstimatorOutcome& o = r.outcomes[e];
      s += std::to_string(r.rep) + "," + std::to_string(r.seed) + "," +
           std::string(to_string(t.config.estimators[e])) + "," + (o.converged ? "1" : "0") + "," +
           std::string(to_string(o.status)) + "," + format_double(o.lambda);
      for (double v : o.mu) s += "," + format_double(v);
      for (double v : {o.kappa_ml, o.kappa_cal, o.mse, o.msre}) s += "," + format_double(v);
      s += "," + std::to_string(o.nonzero) + "," + std::to_string(o.nonzero_first4) + "\n";
    }
  }
  return s;
}

int cmd_simulate(const SimulateCmd& c, std::ostream& out) {
  SimConfig cfg;
  cfg.n = c.n;
  cfg.p = c.p;
  cfg.scenario = parse_scenario(c.scenario);
  cfg.n_reps = c.reps;
  cfg.estimators.clear();
  for (const auto& e : c.estimators) cfg.estimators.push_back(parse_estimator(e));
  cfg.seed = c.grid.seed;
  cfg.cv_folds = c.grid.folds;
  cfg.grid_depth = c.grid.depth;
  cfg.grid_subdiv = c.grid.subdiv;
  cfg.threads = c.threads;
  cfg.solver = solver_config(c.solver);
  cfg.validate();
  const MetricTable table = run_monte_carlo(cfg);
  const std::string agg = aggregate_csv(table);
  if (c.output_dir.empty()) {
    out << agg;
    return 0;
  }
  std::filesystem::create_directories(c.output_dir);
  const std::filesystem::path dir(c.output_dir);
  atomic_write((dir / "aggregate.csv").string(), agg);
  atomic_write((dir / "replicates.csv").string(), replicates_csv(table));
  json m;
  m["version"] = kVersion;
  m["config"] = {{"n", cfg.n},
                 {"p", cfg.p},
                 {"scenario", std::string(to_string(cfg.scenario))},
                 {"reps", cfg.n_reps},
                 {"estimators", c.estimators},
                 {"seed", cfg.seed},
                 {"cv_folds", cfg.cv_folds},
                 {"grid_depth", cfg.grid_depth},
                 {"grid_subdiv", cfg.grid_subdiv},
                 {"surrogate", std::string(to_string(cfg.solver.surrogate))},
                 {"max_iter", cfg.solver.max_outer_iters},
                 {"kkt_tol", cfg.solver.kkt_tol},
                 {"outer_tol", cfg.solver.outer_tol}};
  m["rng"] = "Philox4x32-10; replicate seed = derive_seed(seed, rep); streams 1 (X), 2 (T), 3 (epsilon)";
  json seeds = json::array();
  for (const auto& r : table.replicates) seeds.push_back(r.seed);
  m["replicate_seeds"] = seeds;
  json eh = json::object();
  for (HConfig h : kAllHConfigs) eh[std::string(to_string(h))] = h_expectation(h);
  m["h_expectations"] = eh;
  atomic_write((dir / "manifest.json").string(), dump(m));
  return 0;
}

struct LimitingCmd {
  Index points = 400;
  SolverOptions solver;
  std::string output;
};

int cmd_limiting(const LimitingCmd& c, std::ostream& out) {
  const LimitingDesign setup = limiting_design(c.points);
  const auto results = limiting_experiment(setup, solver_config(c.solver));
  json fits = json::array();
  bool ok = true;
  for (const auto& r : results) {
    fits.push_back({{"loss", std::string(to_string(r.kind))},
                    {"status", std::string(to_string(r.fit.status))},
                    {"gamma", vec(r.fit.coef.gamma)},
                    {"mse", num(r.mse)},
                    {"msre", num(r.msre)}});
    ok = ok && r.fit.converged();
  }
  json j;
  j["points"] = c.points;
  j["fits"] = fits;
  emit(c.output, dump(j), out);
  return ok ? 0 : 2;
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Calibrated propensity-score estimation", "calps"};
  app.set_config("--config", "", "Read options from a TOML/INI file");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  FitCmd fit;
  auto* s_fit = app.add_subcommand("fit", "Fit a propensity-score model");
  add_data_options(s_fit, fit.data, false);
  add_solver_options(s_fit, fit.solver);
  s_fit->add_option("--loss", fit.loss, "ml, cal1, cal0 or bal")
      ->check(CLI::IsMember({"ml", "cal1", "cal", "cal0", "bal"}, CLI::ignore_case));
  s_fit->add_option("--lambda", fit.lambda, "Lasso penalty (omit for an unpenalized fit)")
      ->check(CLI::NonNegativeNumber);
  s_fit->add_option("-o,--output", fit.output, "JSON report path (default stdout)");
  s_fit->add_option("--pi-output", fit.pi_output, "CSV of fitted propensities");

  CvCmd cv;
  auto* s_cv = app.add_subcommand("cv", "Cross-validate the Lasso penalty and fit at the selected value");
  add_data_options(s_cv, cv.data, false);
  add_solver_options(s_cv, cv.solver);
  add_grid_options(s_cv, cv.grid);
  s_cv->add_option("--loss", cv.loss, "ml, cal1, cal0 or bal")
      ->check(CLI::IsMember({"ml", "cal1", "cal", "cal0", "bal"}, CLI::ignore_case));
  s_cv->add_option("-o,--output", cv.output, "JSON report path (default stdout)");
  s_cv->add_option("--pi-output", cv.pi_output, "CSV of fitted propensities");

  EstimateCmd est;
  auto* s_est = app.add_subcommand("estimate", "IPW estimates of means, ATE and ATT");
  add_data_options(s_est, est.data, true);
  add_solver_options(s_est, est.solver);
  add_grid_options(s_est, est.grid);
  s_est->add_option("--loss", est.family, "cal (CAL1 and CAL0 fits), ml or bal")
      ->check(CLI::IsMember({"cal", "ml", "bal"}, CLI::ignore_case));
  auto* lam = s_est->add_option("--lambda", est.lambda, "Shared penalty for both arms (default: per-arm CV)")
                  ->check(CLI::NonNegativeNumber);
  s_est->add_flag("--unpenalized", est.unpenalized, "Unpenalized fits")->excludes(lam);
  s_est->add_option("--pi-treated", est.pi_treated, "Fitted propensities for the treated mean");
  s_est->add_option("--pi-untreated", est.pi_untreated, "Fitted propensities for the untreated mean");
  s_est->add_option("-o,--output", est.output, "JSON report path (default stdout)");

  DiagnoseCmd diag;
  auto* s_diag = app.add_subcommand("diagnose", "Calibration balance and weight diagnostics");
  add_data_options(s_diag, diag.data, false);
  add_solver_options(s_diag, diag.solver);
  s_diag->add_option("--loss", diag.loss, "ml, cal1, cal0 or bal")
      ->check(CLI::IsMember({"ml", "cal1", "cal", "cal0", "bal"}, CLI::ignore_case));
  s_diag->add_option("--lambda", diag.lambda, "Lasso penalty (omit for an unpenalized fit)")
      ->check(CLI::NonNegativeNumber);
  s_diag->add_option("--pi", diag.pi, "Use fitted propensities from this CSV instead of fitting");
  s_diag->add_option("-o,--output", diag.output, "JSON report path (default stdout)");

  SimulateCmd sim;
  auto* s_sim = app.add_subcommand("simulate", "Monte Carlo study");
  s_sim->add_option("--n", sim.n, "Sample size")->check(CLI::Range(Index{2}, Index{100000000}));
  s_sim->add_option("--p", sim.p, "Covariate count")->check(CLI::Range(Index{4}, Index{100000}));
  s_sim->add_option("--scenario", sim.scenario, "correct or misspecified")
      ->check(CLI::IsMember({"correct", "misspecified", "i", "ii"}, CLI::ignore_case));
  s_sim->add_option("--reps", sim.reps, "Replicates")->check(CLI::PositiveNumber);
  s_sim->add_option("--estimators", sim.estimators, "Subset of True,Const,ML,RML,CAL,RCAL")->delimiter(',');
  add_grid_options(s_sim, sim.grid);
  s_sim->add_option("--threads", sim.threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  add_solver_options(s_sim, sim.solver);
  s_sim->add_option("--output-dir", sim.output_dir, "Directory for aggregate.csv, replicates.csv, manifest.json");

  LimitingCmd lim;
  auto* s_lim = app.add_subcommand("limiting-fit", "Limiting fits with T replaced by the true propensity");
  s_lim->add_option("--points", lim.points, "Design points")->check(CLI::Range(Index{2}, Index{10000000}));
  add_solver_options(s_lim, lim.solver);
  s_lim->add_option("-o,--output", lim.output, "JSON report path (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: InvalidArgument: " << one_line(e.what()) << "\n";
    return 1;
  }

  try {
    if (s_fit->parsed()) return cmd_fit(fit, out);
    if (s_cv->parsed()) return cmd_cv(cv, out);
    if (s_est->parsed()) return cmd_estimate(est, out);
    if (s_diag->parsed()) return cmd_diagnose(diag, out);
    if (s_sim->parsed()) return cmd_simulate(sim, out);
    if (s_lim->parsed()) return cmd_limiting(lim, out);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << one_line(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: Internal: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 1;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace calps::cli
