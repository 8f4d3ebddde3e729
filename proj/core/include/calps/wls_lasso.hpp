#pragma once

#include <vector>

#include <Eigen/Core>

#include "calps/data.hpp"

namespace calps {

/// Upper-triangular R with R^T R = H[A, A] for an ordered active set A.
/// R is the triangular factor of the QR decomposition of the weighted design
/// restricted to A; it is updated in place when coordinates enter (one
/// forward solve) or leave (Givens sweep), so the Gram matrix is factored
/// once and never refactored from scratch while H is unchanged.
class ActiveFactor {
 public:
  explicit ActiveFactor(double ridge = 1e-10) : ridge_(ridge) {}

  void reset() {
    order_.clear();
    r_.resize(0, 0);
  }

  const std::vector<Index>& order() const { return order_; }
  Index size() const { return static_cast<Index>(order_.size()); }
  bool contains(Index j) const;

  /// Appends coordinate j. Returns true when the Schur pivot was numerically
  /// zero and the diagonal had to be jittered.
  bool add(const Eigen::MatrixXd& gram, Index j);
  void remove(Index j);

  /// Solves H[A, A] x = rhs (rhs ordered like order()).
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

 private:
  double ridge_;
  std::vector<Index> order_;
  Eigen::MatrixXd r_;
};

struct ActiveSetOptions {
  /// Inner KKT tolerance.
  double kkt_tol = 1e-12;
  /// 0 selects 50 (p + 1) + 100.
  int max_updates = 0;
  double ridge = 1e-10;
};

struct ActiveSetResult {
  Eigen::VectorXd gamma;
  bool rank_deficient = false;
  bool converged = false;
  int updates = 0;
  double kkt_residual = 0.0;
};

/// Minimizes 0.5 x^T H x - b^T x + lambda sum_{j penalized} |x_j| with an
/// active-set (homotopy-style) method: solve the sign-constrained quadratic on
/// the active set, drop coordinates whose sign flips (moving to the first zero
/// crossing), then add the most violating inactive coordinate.
///
/// The solver keeps its Gram matrix and factor between calls; when the Gram
/// matrix is unchanged (unit-weight surrogate) a warm start with the previous
/// support reuses the factor as is.
class ActiveSetLasso {
 public:
  explicit ActiveSetLasso(ActiveSetOptions options = {});

  void set_gram(Eigen::MatrixXd gram);
  const Eigen::MatrixXd& gram() const { return gram_; }

  ActiveSetResult solve(const Eigen::VectorXd& b, double lambda, const std::vector<bool>& penalty_mask,
                        const Eigen::VectorXd& warm_start);

 private:
  ActiveSetOptions options_;
  Eigen::MatrixXd gram_;
  ActiveFactor factor_;
  bool jittered_ = false;
};

struct WlsLassoResult {
  Coefficients coef;
  bool rank_deficient = false;
  bool converged = false;
  int updates = 0;
  double kkt_residual = 0.0;
};

/// Exact minimizer of (1/2n) sum_i w_i (z_i - f_i^T gamma)^2 + lambda ||gamma_{1:p}||_1
/// (penalty per `penalty_mask`).
WlsLassoResult solve_wls_lasso(const DesignMatrix& design, const Eigen::VectorXd& response,
                               const Eigen::VectorXd& weights, double lambda,
                               const std::vector<bool>& penalty_mask,
                               const Eigen::VectorXd& warm_start, ActiveSetOptions options = {});

/// (1/n) f^T diag(w) f.
Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& f, const Eigen::VectorXd& weights);

}  // namespace calps
