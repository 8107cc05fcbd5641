#pragma once

#include <complex>
#include <numbers>

#include <Eigen/Core>

namespace fixinv {

using ComplexMatrix = Eigen::MatrixXcd;

/// n x n DFT matrix with entries exp(sign * 2 pi i * j * k / n).
inline ComplexMatrix dft_matrix(Eigen::Index n, double sign) {
  ComplexMatrix a(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k) {
      // Reduce j*k mod n first so the angle stays small and exact.
      const auto jk = static_cast<double>((j * k) % n);
      a(j, k) = std::polar(1.0, sign * 2.0 * std::numbers::pi * jk / static_cast<double>(n));
    }
  return a;
}

/// Unnormalised 2-D DFT by direct summation, applied along rows then columns.
template <typename Derived>
ComplexMatrix dft2(const Eigen::MatrixBase<Derived>& grid) {
  const ComplexMatrix g = grid.template cast<std::complex<double>>();
  return dft_matrix(g.rows(), -1.0) * g * dft_matrix(g.cols(), -1.0);
}

/// Inverse of dft2, including the 1/(H W) factor.
inline ComplexMatrix idft2(const ComplexMatrix& spectrum) {
  const auto scale = 1.0 / static_cast<double>(spectrum.size());
  return scale * (dft_matrix(spectrum.rows(), 1.0) * spectrum * dft_matrix(spectrum.cols(), 1.0));
}

}  // namespace fixinv
