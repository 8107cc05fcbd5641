#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "fixinv/operators.hpp"

namespace fixinv {

// ---------------------------------------------------------------------------
// Linear pairs

/// Optimal linear autoencoder of a synthetic covariance: D holds the top-F
/// eigenvectors and E = D^T, so E*D = I.
struct PcaOptimal {};

/// Composite E*D = Q diag(eigenvalues) Q^T for a seeded orthogonal Q.
/// Without explicit eigenvalues the spectrum is drawn from the seed: 1 and
/// 1/condition_number at the ends, log-uniform in between.
struct LossySpectrum {
  std::vector<double> eigenvalues;
  bool identity_rotation = false;  ///< force Q = I
  double condition_number = 100.0;
};

struct LinearPairSpec {
  Index pixel_dim = 64;
  Index latent_dim = 16;
  std::uint64_t seed = 0;
  std::variant<PcaOptimal, LossySpectrum> variant = PcaOptimal{};
};

OperatorPair build_linear_pair(const LinearPairSpec& spec);

/// beta = 1/lambda_max of a symmetric PSD composite. Empty for nonlinear
/// pairs, whose cocoercivity can only be probed empirically.
std::optional<double> cocoercivity_constant(const OperatorPair& pair);

// ---------------------------------------------------------------------------
// MLP pairs

struct Activation {
  enum class Kind { Tanh, LeakyRelu, Identity };
  Kind kind = Kind::Tanh;
  double slope = 0.01;  ///< leaky_relu only

  double apply(double u) const;
  double derivative(double u) const;
};

struct MlpPairSpec {
  std::vector<Index> encoder_widths{64, 32, 16};  ///< N ... F
  std::vector<Index> decoder_widths{16, 32, 64};  ///< F ... N
  Activation activation{};
  std::uint64_t seed = 0;
  double weight_scale = 1.0;
  /// Relative size of the independent seeded perturbation added on top of
  /// the pseudo-inverse encoder weights.
  double encoder_perturbation = 0.05;
};

/// Fully connected network without biases; the activation is applied to
/// every layer output except the last.
class Mlp {
 public:
  Mlp(std::vector<Matrix> weights, Activation activation);

  Index input_dim() const { return weights_.front().cols(); }
  Index output_dim() const { return weights_.back().rows(); }
  const std::vector<Matrix>& weights() const noexcept { return weights_; }

  Vector forward(const Vector& in, Precision p = Precision::Full) const;

  /// grad_in ||target - forward(in)||^2, one forward pass plus one backward pass.
  Vector squared_error_gradient(const Vector& target, const Vector& in, Precision p = Precision::Full) const;

 private:
  std::vector<Matrix> weights_;
  Activation activation_;
};

struct MlpAutoencoder {
  Mlp encoder;
  Mlp decoder;
};

/// Weight generation: decoder layers are drawn first, layer by layer and
/// row-major, from N(0, 1) * weight_scale / sqrt(fan_in). Encoder layer i is
/// the pseudo-inverse of the mirrored decoder layer plus a perturbation drawn
/// the same way (scaled by encoder_perturbation), encoder layers in order.
MlpAutoencoder build_mlp_autoencoder(const MlpPairSpec& spec);

OperatorPair build_mlp_pair(const MlpPairSpec& spec);

// ---------------------------------------------------------------------------

using ModelSpec = std::variant<LinearPairSpec, MlpPairSpec>;

OperatorPair build_pair(const ModelSpec& spec);

/// Copy of the spec with its seed replaced.
ModelSpec with_seed(ModelSpec spec, std::uint64_t seed);

}  // namespace fixinv
