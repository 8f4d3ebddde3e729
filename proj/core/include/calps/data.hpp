#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace calps {

using Index = Eigen::Index;

/// Observed data {(Y_i, T_i, X_i)}: binary treatment, optional outcome (NaN
/// where unobserved), and named raw covariate columns.
class Dataset {
 public:
  Dataset(Eigen::VectorXd treatment, Eigen::MatrixXd covariates,
          std::vector<std::string> covariate_names,
          std::optional<Eigen::VectorXd> outcome = std::nullopt);

  Index n() const { return treatment_.size(); }
  const Eigen::VectorXd& treatment() const { return treatment_; }
  const Eigen::MatrixXd& covariates() const { return covariates_; }
  const std::vector<std::string>& covariate_names() const { return names_; }
  const std::optional<Eigen::VectorXd>& outcome() const { return outcome_; }

  /// Column index by name; throws UnknownColumn.
  Index column(const std::string& name) const;

 private:
  Eigen::VectorXd treatment_;
  Eigen::MatrixXd covariates_;
  std::vector<std::string> names_;
  std::optional<Eigen::VectorXd> outcome_;
};

enum class UnaryOp { Square, Cube, Log, Exp, Sqrt };

struct MainEffect {
  std::string column;
};
struct Interaction {
  std::string left;
  std::string right;
};
struct Transform {
  UnaryOp op;
  std::string column;
};
using Term = std::variant<MainEffect, Interaction, Transform>;

std::string term_name(const Term& term);

struct DesignSpec {
  std::vector<Term> terms;
  bool standardize = true;
  /// Candidate columns with fewer nonzero raw values than this are dropped.
  int min_nonzero_count = 0;

  static DesignSpec main_effects(const std::vector<std::string>& columns, bool standardize = true);
  /// All main effects followed by all pairwise interactions (i < j).
  static DesignSpec main_and_pairwise(const std::vector<std::string>& columns,
                                      bool standardize = true);
};

/// The regressor matrix f(X) = [1, f_1(X), ..., f_p(X)]. Column 0 is the
/// intercept. When standardized, non-intercept columns have mean 0 and sample
/// variance 1 (denominator n - 1); center/scale record the transformation.
class DesignMatrix {
 public:
  DesignMatrix() = default;

  /// Prepends an intercept to `features` (n x p) and optionally standardizes.
  static DesignMatrix from_features(const Eigen::MatrixXd& features,
                                    std::vector<std::string> feature_names, bool standardize);

  Index rows() const { return values_.rows(); }
  /// Number of non-intercept columns p.
  Index num_features() const { return values_.cols() - 1; }
  Index cols() const { return values_.cols(); }

  const Eigen::MatrixXd& values() const { return values_; }
  const std::vector<std::string>& column_names() const { return names_; }
  const Eigen::VectorXd& center() const { return center_; }
  const Eigen::VectorXd& scale() const { return scale_; }
  bool standardized() const { return standardized_; }
  const std::vector<std::string>& dropped() const { return dropped_; }

  /// Raw expanded columns (n x p) recovered from center/scale.
  Eigen::MatrixXd unstandardized() const;

  /// Row subset sharing this design's column metadata (no re-standardization).
  DesignMatrix subset_rows(std::span<const Index> rows) const;

 private:
  friend DesignMatrix build_design(const Dataset&, const DesignSpec&);

  Eigen::MatrixXd values_;
  std::vector<std::string> names_;
  Eigen::VectorXd center_;
  Eigen::VectorXd scale_;
  bool standardized_ = false;
  std::vector<std::string> dropped_;
};

/// gamma = (gamma_0, gamma_1, ..., gamma_p). The intercept is never penalized.
struct Coefficients {
  Eigen::VectorXd gamma;
  std::vector<bool> penalty_mask;

  static Coefficients zeros(Index size);
  static Coefficients from(Eigen::VectorXd gamma);

  Index size() const { return gamma.size(); }
  double penalty_l1() const;
  /// Number of nonzero penalized coefficients.
  Index nonzero_count() const;
};

DesignMatrix build_design(const Dataset& dataset, const DesignSpec& spec);

/// g_i = gamma^T f(X_i).
Eigen::VectorXd linear_predictor(const DesignMatrix& design, const Coefficients& coef);

/// Logistic link, branch-stable for large |g|.
double propensity(double g) noexcept;
Eigen::VectorXd propensity(const Eigen::VectorXd& g);

/// log(pi / (1 - pi)).
double logit(double pi) noexcept;

/// Mean of the 0/1 treatment vector; throws DegenerateTreatment unless both arms are present.
double treated_fraction(const Eigen::VectorXd& treatment);

}  // namespace calps
