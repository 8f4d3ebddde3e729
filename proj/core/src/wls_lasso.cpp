#include "calps/wls_lasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "calps/error.hpp"

namespace calps {

namespace {

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

bool ActiveFactor::contains(Index j) const {
  return std::find(order_.begin(), order_.end(), j) != order_.end();
}

bool ActiveFactor::add(const Eigen::MatrixXd& gram, Index j) {
  const Index m = size();
  Eigen::VectorXd col(m);
  for (Index k = 0; k < m; ++k) col[k] = gram(order_[static_cast<std::size_t>(k)], j);
  Eigen::VectorXd r = col;
  if (m > 0) r_.topLeftCorner(m, m).triangularView<Eigen::Upper>().transpose().solveInPlace(r);
  const double hjj = gram(j, j);
  double pivot = hjj - r.squaredNorm();
  bool jittered = false;
  if (!(pivot > 1e-10 * std::max(hjj, std::numeric_limits<double>::min()))) {
    pivot = std::max(pivot, 0.0) + ridge_;
    jittered = true;
  }
  Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(m + 1, m + 1);
  if (m > 0) grown.topLeftCorner(m, m) = r_.topLeftCorner(m, m);
  grown.block(0, m, m, 1) = r;
  grown(m, m) = std::sqrt(pivot);
  r_ = std::move(grown);
  order_.push_back(j);
  return jittered;
}

void ActiveFactor::remove(Index j) {
  auto it = std::find(order_.begin(), order_.end(), j);
  if (it == order_.end()) return;
  const Index k = static_cast<Index>(it - order_.begin());
  const Index m = size();
  Eigen::MatrixXd h(m, m - 1);
  if (k > 0) h.leftCols(k) = r_.leftCols(k);
  if (k < m - 1) h.rightCols(m - 1 - k) = r_.rightCols(m - 1 - k);
  // h is upper Hessenberg from column k on; restore triangularity.
  for (Index c = k; c < m - 1; ++c) {
    const double a = h(c, c);
    const double b = h(c + 1, c);
    const double rr = std::hypot(a, b);
    if (rr == 0.0) continue;
    const double cs = a / rr;
    const double sn = b / rr;
    for (Index q = c; q < m - 1; ++q) {
      const double x = h(c, q);
      const double y = h(c + 1, q);
      h(c, q) = cs * x + sn * y;
      h(c + 1, q) = -sn * x + cs * y;
    }
    h(c + 1, c) = 0.0;
  }
  r_ = h.topRows(m - 1);
  order_.erase(it);
}

Eigen::VectorXd ActiveFactor::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x = rhs;
  if (size() == 0) return x;
  const auto upper = r_.triangularView<Eigen::Upper>();
  upper.transpose().solveInPlace(x);
  upper.solveInPlace(x);
  return x;
}

ActiveSetLasso::ActiveSetLasso(ActiveSetOptions options)
    : options_(options), factor_(options.ridge) {}

void ActiveSetLasso::set_gram(Eigen::MatrixXd gram) {
  if (gram.rows() != gram.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "Gram matrix must be square");
  }
  gram_ = std::move(gram);
  factor_.reset();
  jittered_ = false;
}

ActiveSetResult ActiveSetLasso::solve(const Eigen::VectorXd& b, double lambda,
                                      const std::vector<bool>& penalty_mask,
                                      const Eigen::VectorXd& warm_start) {
  const Index p1 = gram_.rows();
  if (b.size() != p1 || warm_start.size() != p1 || static_cast<Index>(penalty_mask.size()) != p1) {
    throw Error(ErrorCode::DimensionMismatch, "active-set inputs do not match the Gram matrix");
  }
  if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
  const auto penalized = [&](Index j) { return penalty_mask[static_cast<std::size_t>(j)]; };

  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(p1);
  Eigen::VectorXd sign = Eigen::VectorXd::Zero(p1);
  std::vector<bool> start(static_cast<std::size_t>(p1), false);
  for (Index j = 0; j < p1; ++j) {
    if (!penalized(j) || warm_start[j] != 0.0) {
      start[static_cast<std::size_t>(j)] = true;
      gamma[j] = warm_start[j];
      sign[j] = penalized(j) ? sign_of(warm_start[j]) : 0.0;
    }
  }
  // Bring the cached factor in line with the warm-start support.
  for (Index j : std::vector<Index>(factor_.order())) {
    if (!start[static_cast<std::size_t>(j)]) factor_.remove(j);
  }
  for (Index j = 0; j < p1; ++j) {
    if (start[static_cast<std::size_t>(j)] && !factor_.contains(j)) {
      jittered_ = factor_.add(gram_, j) || jittered_;
    }
  }

  ActiveSetResult out;
  const int max_updates =
      options_.max_updates > 0 ? options_.max_updates : static_cast<int>(50 * p1 + 100);
  Eigen::VectorXd c(p1);
  while (true) {
    const auto& order = factor_.order();
    const Index m = factor_.size();
    Eigen::VectorXd rhs(m);
    for (Index k = 0; k < m; ++k) {
      const Index j = order[static_cast<std::size_t>(k)];
      rhs[k] = b[j] - lambda * sign[j];
    }
    const Eigen::VectorXd x = factor_.solve(rhs);

    double t_min = std::numeric_limits<double>::infinity();
    Index drop = -1;
    for (Index k = 0; k < m; ++k) {
      const Index j = order[static_cast<std::size_t>(k)];
      if (!penalized(j) || sign[j] * x[k] > 0.0) continue;
      const double denom = gamma[j] - x[k];
      double t = denom != 0.0 ? gamma[j] / denom : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      if (t < t_min) {
        t_min = t;
        drop = j;
      }
    }
    if (drop >= 0) {
      for (Index k = 0; k < m; ++k) {
        const Index j = order[static_cast<std::size_t>(k)];
        gamma[j] += t_min * (x[k] - gamma[j]);
      }
      gamma[drop] = 0.0;
      sign[drop] = 0.0;
      factor_.remove(drop);
      if (++out.updates >= max_updates) break;
      continue;
    }
    for (Index k = 0; k < m; ++k) gamma[order[static_cast<std::size_t>(k)]] = x[k];

    c.noalias() = b - gram_ * gamma;
    double worst = 0.0;
    Index enter = -1;
    for (Index j = 0; j < p1; ++j) {
      if (!penalized(j) || sign[j] != 0.0) continue;
      const double excess = std::abs(c[j]) - lambda;
      if (excess > worst) {
        worst = excess;
        enter = j;
      }
    }
    if (enter < 0 || worst <= options_.kkt_tol) {
      out.converged = true;
      break;
    }
    sign[enter] = sign_of(c[enter]);
    jittered_ = factor_.add(gram_, enter) || jittered_;
    if (++out.updates >= max_updates) break;
  }

  c.noalias() = b - gram_ * gamma;
  double resid = 0.0;
  for (Index j = 0; j < p1; ++j) {
    double r;
    if (!penalized(j)) {
      r = std::abs(c[j]);
    } else if (gamma[j] != 0.0) {
      r = std::abs(c[j] - lambda * sign_of(gamma[j]));
    } else {
      r = std::max(0.0, std::abs(c[j]) - lambda);
    }
    resid = std::max(resid, r);
  }
  out.kkt_residual = resid;
  out.gamma = std::move(gamma);
  out.rank_deficient = jittered_;
  return out;
}

Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& f, const Eigen::VectorXd& weights) {
  const double inv_n = 1.0 / static_cast<double>(f.rows());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(f.cols(), f.cols());
  h.selfadjointView<Eigen::Lower>().rankUpdate((f.array().colwise() * weights.array().sqrt()).matrix().transpose(),
                                               inv_n);
  return h.selfadjointView<Eigen::Lower>();
}

WlsLassoResult solve_wls_lasso(const DesignMatrix& design, const Eigen::VectorXd& response,
                               const Eigen::VectorXd& weights, double lambda,
                               const std::vector<bool>& penalty_mask,
                               const Eigen::VectorXd& warm_start, ActiveSetOptions options) {
  const Index n = design.rows();
  if (response.size() != n || weights.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "response/weights length must match design rows");
  }
  if ((weights.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "weights must be nonnegative");
  }
  const Eigen::MatrixXd& f = design.values();
  ActiveSetLasso solver(options);
  solver.set_gram(weighted_gram(f, weights));
  const Eigen::VectorXd b = f.transpose() * weights.cwiseProduct(response) / static_cast<double>(n);
  const ActiveSetResult r = solver.solve(b, lambda, penalty_mask, warm_start);
  WlsLassoResult out;
  out.coef.gamma = r.gamma;
  out.coef.penalty_mask = penalty_mask;
  out.rank_deficient = r.rank_deficient;
  out.converged = r.converged;
  out.updates = r.updates;
  out.kkt_residual = r.kkt_residual;
  return out;
}

}  // namespace calps
