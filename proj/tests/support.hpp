#pragma once

#include "fixinv/harness.hpp"

namespace fixinv::test {

// E = diag(eigenvalues), D = I on R^F.
inline OperatorPair diagonal_pair(std::vector<double> eigenvalues) {
  const auto f = static_cast<Index>(eigenvalues.size());
  LinearPairSpec spec{f, f, 0, LossySpectrum{std::move(eigenvalues), true}};
  return build_linear_pair(spec);
}

inline OperatorPair diag_1_half() { return diagonal_pair({1.0, 0.5}); }

inline OperatorPair identity2() { return diagonal_pair({1.0, 1.0}); }

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double d : v) out(i++) = d;
  return out;
}

inline SolverConfig config(Method m, Schedule s, int k, Precision p = Precision::Full) {
  SolverConfig c;
  c.method = m;
  c.schedule = s;
  c.max_iters = k;
  c.precision = p;
  return c;
}

}  // namespace fixinv::test
