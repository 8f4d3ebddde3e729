#pragma once

#include <string>
#include <vector>

#include "calps/data.hpp"
#include "calps/losses.hpp"
#include "oracles.hpp"

namespace testing_support {

inline oracle::Loss to_oracle(calps::LossKind k) {
  switch (k) {
    case calps::LossKind::ML: return oracle::Loss::ML;
    case calps::LossKind::CAL1: return oracle::Loss::CAL1;
    case calps::LossKind::CAL0: return oracle::Loss::CAL0;
    case calps::LossKind::BAL: return oracle::Loss::BAL;
  }
  return oracle::Loss::ML;
}

inline std::vector<std::string> names(Eigen::Index p, const char* prefix = "x") {
  std::vector<std::string> v;
  for (Eigen::Index j = 1; j <= p; ++j) v.push_back(prefix + std::to_string(j));
  return v;
}

/// Design from the non-intercept columns of an oracle instance.
inline calps::DesignMatrix design_of(const oracle::Instance& in, bool standardize = true) {
  const Eigen::Index p = in.f.cols() - 1;
  return calps::DesignMatrix::from_features(in.f.rightCols(p), names(p), standardize);
}

inline calps::DesignMatrix design_from(const Eigen::MatrixXd& features, bool standardize = false) {
  return calps::DesignMatrix::from_features(features, names(features.cols()), standardize);
}

inline constexpr calps::LossKind kKinds[] = {calps::LossKind::ML, calps::LossKind::CAL1,
                                             calps::LossKind::CAL0, calps::LossKind::BAL};

}  // namespace testing_support
