#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include <Eigen/Core>

namespace calps {

/// Arguments to exp() are clamped to [-kExpCap, kExpCap].
inline constexpr double kExpCap = 700.0;

/// Pairwise (cascade) summation with a fixed association order, so results
/// depend only on the input sequence and not on threading or vectorization.
double pairwise_sum(std::span<const double> values) noexcept;

inline double pairwise_sum(const Eigen::VectorXd& v) noexcept {
  return pairwise_sum(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

inline double pairwise_mean(const Eigen::VectorXd& v) noexcept {
  return v.size() == 0 ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

/// exp(x) with the argument saturated at +-kExpCap; sets *overflow when clamped.
inline double capped_exp(double x, bool* overflow = nullptr) noexcept {
  if (x > kExpCap) {
    if (overflow) *overflow = true;
    x = kExpCap;
  } else if (x < -kExpCap) {
    if (overflow) *overflow = true;
    x = -kExpCap;
  }
  return std::exp(x);
}

/// log(1 + e^x) without overflow.
inline double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace calps
