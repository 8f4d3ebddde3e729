#include "calps/estimators.hpp"

#include <cmath>

#include "calps/error.hpp"
#include "calps/numeric.hpp"

namespace calps {

namespace {

void check_lengths(const Eigen::VectorXd& treatment, const Eigen::VectorXd& other, const char* what) {
  if (treatment.size() != other.size()) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " length differs from treatment");
  }
}

bool on_arm(double t, Orientation o) { return o == Orientation::Treated ? t == 1.0 : t == 0.0; }

/// Per-row weight on the arm, zero elsewhere.
Eigen::VectorXd row_weights(const Eigen::VectorXd& treatment, const Eigen::VectorXd& pi_hat,
                            Orientation o) {
  check_lengths(treatment, pi_hat, "pi_hat");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(treatment.size());
  for (Index i = 0; i < treatment.size(); ++i) {
    if (!on_arm(treatment[i], o)) continue;
    const double q = o == Orientation::Treated ? pi_hat[i] : 1.0 - pi_hat[i];
    if (!(q > 0.0) || !std::isfinite(q)) {
      throw Error(ErrorCode::DegenerateWeights, "fitted propensity saturated on the weighted arm");
    }
    w[i] = 1.0 / q;
  }
  return w;
}

}  // namespace

std::string_view to_string(Orientation o) noexcept {
  return o == Orientation::Treated ? "treated" : "untreated";
}

Eigen::VectorXd arm_weights(const Eigen::VectorXd& treatment, const Eigen::VectorXd& pi_hat,
                            Orientation orientation) {
  const Eigen::VectorXd w = row_weights(treatment, pi_hat, orientation);
  std::vector<double> out;
  for (Index i = 0; i < treatment.size(); ++i) {
    if (on_arm(treatment[i], orientation)) out.push_back(w[i]);
  }
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Index>(out.size()));
}

IpwMeans ipw_means(const Eigen::VectorXd& treatment, const Eigen::VectorXd& outcome,
                   const Eigen::VectorXd& pi_hat, Orientation orientation) {
  check_lengths(treatment, outcome, "outcome");
  const Eigen::VectorXd w = row_weights(treatment, pi_hat, orientation);
  Eigen::VectorXd wy = Eigen::VectorXd::Zero(w.size());
  for (Index i = 0; i < w.size(); ++i) {
    if (w[i] != 0.0) wy[i] = w[i] * outcome[i];
  }
  const double ipw = pairwise_mean(wy);
  const double denom = pairwise_mean(w);
  if (!(denom > 0.0)) throw Error(ErrorCode::ArmTooSmall, "no subjects on the weighted arm");
  return {ipw, ipw / denom};
}

AttEstimate estimate_att(const Eigen::VectorXd& treatment, const Eigen::VectorXd& outcome,
                         const Eigen::VectorXd& pi_hat) {
  check_lengths(treatment, outcome, "outcome");
  check_lengths(treatment, pi_hat, "pi_hat");
  const Index n = treatment.size();
  Eigen::VectorXd ty = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd odds = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd odds_y = Eigen::VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    if (treatment[i] == 1.0) {
      ty[i] = outcome[i];
    } else {
      if (!(pi_hat[i] < 1.0)) {
        throw Error(ErrorCode::DegenerateWeights, "fitted propensity saturated at 1 on the untreated");
      }
      odds[i] = pi_hat[i] / (1.0 - pi_hat[i]);
      odds_y[i] = odds[i] * outcome[i];
    }
  }
  const double tbar = pairwise_mean(treatment);
  if (!(tbar > 0.0)) throw Error(ErrorCode::ArmTooSmall, "no treated subjects");
  if (!(tbar < 1.0)) throw Error(ErrorCode::ArmTooSmall, "no untreated subjects");
  AttEstimate a;
  a.nu1 = pairwise_mean(ty) / tbar;
  a.nu0_ipw = pairwise_mean(odds_y) / tbar;
  a.nu0_ripw = pairwise_sum(odds_y) / pairwise_sum(odds);
  a.att = a.nu1 - a.nu0_ripw;
  return a;
}

Eigen::VectorXd entropy_balancing_weights(const DesignMatrix& design, const Eigen::VectorXd& treatment,
                                          const Coefficients& coef) {
  check_lengths(treatment, Eigen::VectorXd(design.values().col(0)), "design");
  if (coef.size() != design.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "coefficients do not match the design");
  }
  const Index n = design.rows();
  const Index p = design.num_features();
  const Eigen::VectorXd score = design.values().rightCols(p) * coef.gamma.tail(p);
  double top = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i) {
    if (treatment[i] == 0.0) top = std::max(top, score[i]);
  }
  if (!std::isfinite(top)) throw Error(ErrorCode::ArmTooSmall, "no untreated subjects");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    if (treatment[i] == 0.0) w[i] = std::exp(score[i] - top);
  }
  return w / pairwise_sum(w);
}

Eigen::VectorXd std_calibration_diff(const DesignMatrix& design, const Eigen::VectorXd& treatment,
                                     const Eigen::VectorXd& pi_hat, Orientation orientation) {
  check_lengths(treatment, pi_hat, "pi_hat");
  if (design.rows() != treatment.size()) {
    throw Error(ErrorCode::DimensionMismatch, "design rows and treatment length differ");
  }
  const Index n = design.rows();
  const Index p = design.num_features();
  if (n < 2) throw Error(ErrorCode::ArmTooSmall, "need at least two rows");
  const Eigen::VectorXd w = row_weights(treatment, pi_hat, orientation);
  const double wsum = pairwise_sum(w);
  if (!(wsum > 0.0)) throw Error(ErrorCode::ArmTooSmall, "no subjects on the weighted arm");
  Eigen::VectorXd out(p);
  Eigen::VectorXd tmp(n);
  for (Index j = 0; j < p; ++j) {
    const auto col = design.values().col(j + 1);
    tmp = col;
    const double mean = pairwise_mean(tmp);
    tmp = (col.array() - mean).square();
    const double sd = std::sqrt(pairwise_sum(tmp) / static_cast<double>(n - 1));
    if (!(sd > 0.0)) {
      throw Error(ErrorCode::ZeroVariance, "column '" + design.column_names()[static_cast<std::size_t>(j + 1)] +
                                               "' has zero variance");
    }
    tmp = w.cwiseProduct(col);
    out[j] = (pairwise_sum(tmp) / wsum - mean) / sd;
  }
  return out;
}

double relative_variance(const Eigen::VectorXd& weights) {
  const Index m = weights.size();
  if (m < 2) throw Error(ErrorCode::ArmTooSmall, "relative variance needs at least two weights");
  const double mean = pairwise_mean(weights);
  if (mean == 0.0 || !std::isfinite(mean)) {
    throw Error(ErrorCode::DegenerateWeights, "weights have zero or non-finite mean");
  }
  const Eigen::VectorXd dev = (weights.array() - mean).square();
  return pairwise_sum(dev) / (static_cast<double>(m - 1) * mean * mean);
}

double nominal_se(const Eigen::VectorXd& treatment, const Eigen::VectorXd& outcome,
                  const Eigen::VectorXd& pi_hat, Orientation orientation) {
  const IpwMeans mu = ipw_means(treatment, outcome, pi_hat, orientation);
  const Eigen::VectorXd w = row_weights(treatment, pi_hat, orientation);
  const Index n = w.size();
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    if (w[i] != 0.0) {
      const double e = w[i] * (outcome[i] - mu.ripw);
      sq[i] = e * e;
    }
  }
  return std::sqrt(pairwise_mean(sq) / static_cast<double>(n)) / pairwise_mean(w);
}

EstimateReport make_estimate_report(const DesignMatrix& design, const Eigen::VectorXd& treatment,
                                    const Eigen::VectorXd& outcome, const Eigen::VectorXd& pi_treated,
                                    const Eigen::VectorXd& pi_untreated) {
  EstimateReport r;
  const IpwMeans m1 = ipw_means(treatment, outcome, pi_treated, Orientation::Treated);
  const IpwMeans m0 = ipw_means(treatment, outcome, pi_untreated, Orientation::Untreated);
  r.mu1_ipw = m1.ipw;
  r.mu1_ripw = m1.ripw;
  r.mu0_ipw = m0.ipw;
  r.mu0_ripw = m0.ripw;
  r.ate = m1.ripw - m0.ripw;
  r.se_mu1 = nominal_se(treatment, outcome, pi_treated, Orientation::Treated);
  r.se_mu0 = nominal_se(treatment, outcome, pi_untreated, Orientation::Untreated);
  r.se_ate = std::hypot(r.se_mu1, r.se_mu0);
  r.att = estimate_att(treatment, outcome, pi_untreated);
  r.balance_treated = std_calibration_diff(design, treatment, pi_treated, Orientation::Treated);
  r.balance_untreated = std_calibration_diff(design, treatment, pi_untreated, Orientation::Untreated);
  const Eigen::VectorXd w1 = arm_weights(treatment, pi_treated, Orientation::Treated);
  const Eigen::VectorXd w0 = arm_weights(treatment, pi_untreated, Orientation::Untreated);
  r.relvar_treated = w1.size() >= 2 ? relative_variance(w1) : 0.0;
  r.relvar_untreated = w0.size() >= 2 ? relative_variance(w0) : 0.0;
  return r;
}

}  // namespace calps
