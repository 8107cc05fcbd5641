#pragma once

#include <functional>
#include <optional>
#include <string_view>

#include <Eigen/Core>

#include "fixinv/error.hpp"
#include "fixinv/half.hpp"

namespace fixinv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Evaluation precision threaded through models and solvers.
///
/// HalfEmulated rounds to binary16 at every layer output and every solver
/// state update; arithmetic in between stays in double.
enum class Precision { Full, HalfEmulated };

std::string_view to_string(Precision p);
Precision parse_precision(std::string_view name);

inline Vector apply_precision(Vector v, Precision p) {
  if (p == Precision::HalfEmulated) v = round_to_half(v);
  return v;
}

/// Encoder and decoder matrices of a linear pair: E is F x N, D is N x F.
struct LinearMaps {
  Matrix encoder;
  Matrix decoder;
};

/// Encoder E: R^N -> R^F and decoder D: R^F -> R^N, the object being
/// inverted. Copies are cheap; model state is shared behind the callables.
class OperatorPair {
 public:
  using Map = std::function<Vector(const Vector&, Precision)>;
  /// Computes grad_z ||x - D(z)||^2 given (x, z).
  using Gradient = std::function<Vector(const Vector&, const Vector&, Precision)>;

  OperatorPair(Index pixel_dim, Index latent_dim, Map encode, Map decode,
               Gradient gradient = {}, std::optional<LinearMaps> linear = std::nullopt);

  Index pixel_dim() const noexcept { return pixel_dim_; }
  Index latent_dim() const noexcept { return latent_dim_; }

  Vector encode(const Vector& x, Precision p = Precision::Full) const;
  Vector decode(const Vector& z, Precision p = Precision::Full) const;

  bool has_gradient() const noexcept { return static_cast<bool>(gradient_); }
  /// grad_z ||x - D(z)||^2. Throws NoGradient when the pair has none.
  Vector loss_gradient(const Vector& x, const Vector& z, Precision p = Precision::Full) const;

  /// Present only for linear pairs.
  const std::optional<LinearMaps>& linear() const noexcept { return linear_; }

 private:
  Index pixel_dim_;
  Index latent_dim_;
  Map encode_;
  Map decode_;
  Gradient gradient_;
  std::optional<LinearMaps> linear_;
};

/// The composite E*D of a linear pair. Throws NotLinear otherwise.
Matrix composite(const OperatorPair& pair);

/// T(z) = E(D(z)) - E(x), with the target latent E(x) fixed at construction.
class ResidualOperator {
 public:
  ResidualOperator(OperatorPair pair, Vector target_latent);

  /// Builds T for an image x, evaluating E(x) under the given precision.
  static ResidualOperator for_image(const OperatorPair& pair, const Vector& x,
                                    Precision p = Precision::Full);

  const OperatorPair& pair() const noexcept { return pair_; }
  const Vector& target_latent() const noexcept { return target_; }

  /// E(D(z)) without the target subtracted.
  Vector round_trip(const Vector& z, Precision p = Precision::Full) const;
  Vector apply(const Vector& z, Precision p = Precision::Full) const;

 private:
  OperatorPair pair_;
  Vector target_;
};

/// Throws DimensionMismatch on a wrong-sized z and NonFiniteOutput when the
/// result contains NaN or Inf.
Vector apply_residual(const ResidualOperator& op, const Vector& z, Precision p = Precision::Full);

void require_finite(const Vector& v, std::string_view what);
void require_dim(const Vector& v, Index dim, std::string_view what);

}  // namespace fixinv
