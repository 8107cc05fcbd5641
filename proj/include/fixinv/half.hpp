#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Core>

namespace fixinv {

/// Rounds a double to the nearest IEEE binary16 value (ties to even) and
/// widens it back. Values past the binary16 range become +-infinity.
///
/// Every finite binary16 value is k * 2^(e-10) for an integer k, so the
/// rounding is a single scaled round-to-nearest-even. Scaling by a power of
/// two is exact in double precision, which makes the result identical to a
/// bit-level conversion.
inline double round_to_half(double x) noexcept {
  if (!std::isfinite(x) || x == 0.0) return x;
  constexpr double kMaxHalf = 65504.0;
  constexpr int kMinNormalExp = -14;

  int exp = 0;
  std::frexp(x, &exp);  // |x| in [2^(exp-1), 2^exp)
  const int unbiased = exp - 1;
  const int quantum_exp = (unbiased < kMinNormalExp ? kMinNormalExp : unbiased) - 10;
  const double scaled = std::ldexp(x, -quantum_exp);
  // nearbyint honours the default FE_TONEAREST mode, i.e. ties to even.
  const double r = std::ldexp(std::nearbyint(scaled), quantum_exp);
  if (std::abs(r) > kMaxHalf) return std::copysign(std::numeric_limits<double>::infinity(), x);
  return r;
}

template <typename Derived>
auto round_to_half(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  return v.unaryExpr([](Scalar s) { return static_cast<Scalar>(round_to_half(static_cast<double>(s))); });
}

}  // namespace fixinv
