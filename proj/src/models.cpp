#include "fixinv/models.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <type_traits>

#include <Eigen/Dense>

#include "fixinv/rng.hpp"

namespace fixinv {

namespace {

// Orthogonal factor of a QR of a Gaussian matrix, with the sign of each
// column fixed by diag(R) so the draw is unique.
Matrix random_orthogonal(Index n, Rng& rng) {
  const Matrix a = rng.normal_matrix(n, n);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

OperatorPair make_linear_pair(Matrix encoder, Matrix decoder) {
  const Index n = decoder.rows();
  const Index f = decoder.cols();
  auto maps = std::make_shared<const LinearMaps>(LinearMaps{std::move(encoder), std::move(decoder)});

  auto encode = [maps](const Vector& x, Precision p) { return apply_precision(maps->encoder * x, p); };
  auto decode = [maps](const Vector& z, Precision p) { return apply_precision(maps->decoder * z, p); };
  auto gradient = [maps](const Vector& x, const Vector& z, Precision p) {
    const Vector err = apply_precision(x - apply_precision(maps->decoder * z, p), p);
    return apply_precision(-2.0 * (maps->decoder.transpose() * err), p);
  };
  return OperatorPair(n, f, encode, decode, gradient, *maps);
}

}  // namespace

OperatorPair build_linear_pair(const LinearPairSpec& spec) {
  const Index n = spec.pixel_dim;
  const Index f = spec.latent_dim;
  if (f < 1 || f > n) throw Error(ErrorCode::InvalidSpec, "need 1 <= latent_dim <= pixel_dim");
  Rng rng(spec.seed);

  if (std::holds_alternative<PcaOptimal>(spec.variant)) {
    const Matrix a = rng.normal_matrix(n, n);
    const Matrix cov = a * a.transpose() + 1e-6 * Matrix::Identity(n, n);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    // Eigenvalues come back ascending; the top F are the last columns.
    Matrix d = eig.eigenvectors().rightCols(f).rowwise().reverse();
    Matrix e = d.transpose();
    return make_linear_pair(std::move(e), std::move(d));
  }

  const auto& lossy = std::get<LossySpectrum>(spec.variant);
  const bool drawn = lossy.eigenvalues.empty();
  if (!drawn && static_cast<Index>(lossy.eigenvalues.size()) != f)
    throw Error(ErrorCode::InvalidSpec, "LossySpectrum needs exactly latent_dim eigenvalues");
  if (drawn && !(lossy.condition_number >= 1.0 && std::isfinite(lossy.condition_number)))
    throw Error(ErrorCode::InvalidSpec, "LossySpectrum condition number must be >= 1");

  Matrix d;  // N x F, orthonormal columns
  Matrix q;  // F x F rotation of the composite
  if (lossy.identity_rotation) {
    d = Matrix::Identity(n, f);
    q = Matrix::Identity(f, f);
  } else {
    d = random_orthogonal(n, rng).leftCols(f);
    q = random_orthogonal(f, rng);
  }

  Vector lambda(f);
  if (drawn) {
    const double log_cond = std::log(lossy.condition_number);
    for (Index i = 0; i < f; ++i) lambda(i) = std::exp(-log_cond * rng.uniform());
    std::sort(lambda.begin(), lambda.end(), std::greater<>());
    lambda(0) = 1.0;
    if (f > 1) lambda(f - 1) = 1.0 / lossy.condition_number;
  } else {
    for (Index i = 0; i < f; ++i) {
      lambda(i) = lossy.eigenvalues[static_cast<std::size_t>(i)];
      if (!(lambda(i) > 0.0) || !std::isfinite(lambda(i)))
        throw Error(ErrorCode::InvalidSpec, "LossySpectrum eigenvalues must be positive");
    }
  }
  // E*D = Q diag(lambda) Q^T (D^T D) = Q diag(lambda) Q^T.
  Matrix e = q * lambda.asDiagonal() * q.transpose() * d.transpose();
  return make_linear_pair(std::move(e), std::move(d));
}

std::optional<double> cocoercivity_constant(const OperatorPair& pair) {
  if (!pair.linear()) return std::nullopt;
  const Matrix m = composite(pair);
  if (!m.isApprox(m.transpose(), 1e-9))
    throw Error(ErrorCode::InvalidSpec, "cocoercivity constant needs a symmetric composite");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  const double lmax = eig.eigenvalues().maxCoeff();
  if (eig.eigenvalues().minCoeff() < -1e-12 || !(lmax > 0.0))
    throw Error(ErrorCode::InvalidSpec, "composite is not positive semidefinite");
  return 1.0 / lmax;
}

// ---------------------------------------------------------------------------

double Activation::apply(double u) const {
  switch (kind) {
    case Kind::Tanh: return std::tanh(u);
    case Kind::LeakyRelu: return u >= 0.0 ? u : slope * u;
    case Kind::Identity: return u;
  }
  return u;
}

double Activation::derivative(double u) const {
  switch (kind) {
    case Kind::Tanh: {
      const double t = std::tanh(u);
      return 1.0 - t * t;
    }
    case Kind::LeakyRelu: return u >= 0.0 ? 1.0 : slope;
    case Kind::Identity: return 1.0;
  }
  return 1.0;
}

Mlp::Mlp(std::vector<Matrix> weights, Activation activation)
    : weights_(std::move(weights)), activation_(activation) {
  if (weights_.empty()) throw Error(ErrorCode::InvalidSpec, "MLP needs at least one layer");
  for (std::size_t i = 1; i < weights_.size(); ++i)
    if (weights_[i].cols() != weights_[i - 1].rows())
      throw Error(ErrorCode::InvalidSpec, "MLP layer widths do not chain");
}

Vector Mlp::forward(const Vector& in, Precision p) const {
  require_dim(in, input_dim(), "MLP input");
  Vector h = in;
  const std::size_t last = weights_.size() - 1;
  for (std::size_t i = 0; i <= last; ++i) {
    Vector pre = weights_[i] * h;
    if (i != last) pre = pre.unaryExpr([this](double u) { return activation_.apply(u); });
    h = apply_precision(std::move(pre), p);
  }
  return h;
}

Vector Mlp::squared_error_gradient(const Vector& target, const Vector& in, Precision p) const {
  require_dim(target, output_dim(), "MLP target");
  require_dim(in, input_dim(), "MLP input");
  const std::size_t layers = weights_.size();
  std::vector<Vector> pre(layers);
  Vector h = in;
  for (std::size_t i = 0; i < layers; ++i) {
    pre[i] = apply_precision(weights_[i] * h, p);
    h = i + 1 < layers ? apply_precision(pre[i].unaryExpr([this](double u) { return activation_.apply(u); }), p)
                       : pre[i];
  }
  // d/d(out) ||target - out||^2 = -2 (target - out)
  Vector g = apply_precision(-2.0 * (target - h), p);
  for (std::size_t i = layers; i-- > 0;) {
    if (i + 1 < layers)
      g = apply_precision(g.cwiseProduct(pre[i].unaryExpr([this](double u) { return activation_.derivative(u); })), p);
    g = apply_precision(weights_[i].transpose() * g, p);
  }
  return g;
}

MlpAutoencoder build_mlp_autoencoder(const MlpPairSpec& spec) {
  const auto& enc = spec.encoder_widths;
  const auto& dec = spec.decoder_widths;
  if (enc.size() < 2 || dec.size() < 2) throw Error(ErrorCode::InvalidSpec, "need at least one layer per side");
  if (enc.size() != dec.size()) throw Error(ErrorCode::InvalidSpec, "encoder and decoder depths differ");
  for (std::size_t i = 0; i < enc.size(); ++i) {
    if (enc[i] <= 0) throw Error(ErrorCode::InvalidSpec, "widths must be positive");
    if (enc[i] != dec[dec.size() - 1 - i])
      throw Error(ErrorCode::InvalidSpec, "encoder widths must mirror decoder widths");
  }
  if (enc.back() > enc.front()) throw Error(ErrorCode::InvalidSpec, "latent width exceeds pixel width");
  if (!(spec.weight_scale > 0.0)) throw Error(ErrorCode::InvalidSpec, "weight_scale must be positive");

  Rng rng(spec.seed);
  const std::size_t layers = dec.size() - 1;
  std::vector<Matrix> dec_w;
  dec_w.reserve(layers);
  for (std::size_t i = 0; i < layers; ++i) {
    const Index fan_in = dec[i];
    dec_w.push_back(rng.normal_matrix(dec[i + 1], fan_in, spec.weight_scale / std::sqrt(static_cast<double>(fan_in))));
  }
  std::vector<Matrix> enc_w;
  enc_w.reserve(layers);
  for (std::size_t i = 0; i < layers; ++i) {
    const Matrix& mirrored = dec_w[layers - 1 - i];
    Matrix w = mirrored.completeOrthogonalDecomposition().pseudoInverse();
    const Index fan_in = enc[i];
    w += rng.normal_matrix(enc[i + 1], fan_in,
                           spec.encoder_perturbation * spec.weight_scale / std::sqrt(static_cast<double>(fan_in)));
    enc_w.push_back(std::move(w));
  }
  return {Mlp(std::move(enc_w), spec.activation), Mlp(std::move(dec_w), spec.activation)};
}

OperatorPair build_mlp_pair(const MlpPairSpec& spec) {
  auto model = std::make_shared<const MlpAutoencoder>(build_mlp_autoencoder(spec));
  auto encode = [model](const Vector& x, Precision p) { return model->encoder.forward(x, p); };
  auto decode = [model](const Vector& z, Precision p) { return model->decoder.forward(z, p); };
  auto gradient = [model](const Vector& x, const Vector& z, Precision p) {
    return model->decoder.squared_error_gradient(x, z, p);
  };
  return OperatorPair(model->encoder.input_dim(), model->encoder.output_dim(), encode, decode, gradient);
}

OperatorPair build_pair(const ModelSpec& spec) {
  return std::visit(
      [](const auto& s) {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, LinearPairSpec>) return build_linear_pair(s);
        else return build_mlp_pair(s);
      },
      spec);
}

ModelSpec with_seed(ModelSpec spec, std::uint64_t seed) {
  std::visit([seed](auto& s) { s.seed = seed; }, spec);
  return spec;
}

}  // namespace fixinv
