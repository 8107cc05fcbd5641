#include "fixinv/operators.hpp"

#include <string>
#include <utility>

namespace fixinv {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteOutput: return "NonFiniteOutput";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::NotLinear: return "NotLinear";
    case ErrorCode::NoGradient: return "NoGradient";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::ZeroReference: return "ZeroReference";
    case ErrorCode::TraceTooShort: return "TraceTooShort";
    case ErrorCode::OracleUnavailable: return "OracleUnavailable";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidRadius: return "InvalidRadius";
    case ErrorCode::EmptyStrategies: return "EmptyStrategies";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::ConfigParse: return "ConfigParse";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

std::string_view to_string(Precision p) { return p == Precision::Full ? "full" : "half"; }

Precision parse_precision(std::string_view name) {
  if (name == "full") return Precision::Full;
  if (name == "half") return Precision::HalfEmulated;
  throw Error(ErrorCode::ConfigParse, "unknown precision '" + std::string(name) + "'");
}

void require_finite(const Vector& v, std::string_view what) {
  if (!v.allFinite()) throw Error(ErrorCode::NonFiniteOutput, std::string(what) + " produced NaN/Inf");
}

void require_dim(const Vector& v, Index dim, std::string_view what) {
  if (v.size() != dim)
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": expected dim " + std::to_string(dim) +
                                                  ", got " + std::to_string(v.size()));
}

OperatorPair::OperatorPair(Index pixel_dim, Index latent_dim, Map encode, Map decode, Gradient gradient,
                           std::optional<LinearMaps> linear)
    : pixel_dim_(pixel_dim),
      latent_dim_(latent_dim),
      encode_(std::move(encode)),
      decode_(std::move(decode)),
      gradient_(std::move(gradient)),
      linear_(std::move(linear)) {
  if (pixel_dim_ <= 0 || latent_dim_ <= 0) throw Error(ErrorCode::InvalidSpec, "dimensions must be positive");
}

Vector OperatorPair::encode(const Vector& x, Precision p) const {
  require_dim(x, pixel_dim_, "encode input");
  return encode_(x, p);
}

Vector OperatorPair::decode(const Vector& z, Precision p) const {
  require_dim(z, latent_dim_, "decode input");
  return decode_(z, p);
}

Vector OperatorPair::loss_gradient(const Vector& x, const Vector& z, Precision p) const {
  if (!gradient_) throw Error(ErrorCode::NoGradient, "pair has no gradient capability");
  require_dim(x, pixel_dim_, "gradient image");
  require_dim(z, latent_dim_, "gradient latent");
  return gradient_(x, z, p);
}

Matrix composite(const OperatorPair& pair) {
  if (!pair.linear()) throw Error(ErrorCode::NotLinear, "composite E*D needs a linear pair");
  return pair.linear()->encoder * pair.linear()->decoder;
}

ResidualOperator::ResidualOperator(OperatorPair pair, Vector target_latent)
    : pair_(std::move(pair)), target_(std::move(target_latent)) {
  require_dim(target_, pair_.latent_dim(), "target latent");
}

ResidualOperator ResidualOperator::for_image(const OperatorPair& pair, const Vector& x, Precision p) {
  return ResidualOperator(pair, pair.encode(x, p));
}

Vector ResidualOperator::round_trip(const Vector& z, Precision p) const {
  return pair_.encode(pair_.decode(z, p), p);
}

Vector ResidualOperator::apply(const Vector& z, Precision p) const {
  require_dim(z, pair_.latent_dim(), "residual input");
  return apply_precision(round_trip(z, p) - target_, p);
}

Vector apply_residual(const ResidualOperator& op, const Vector& z, Precision p) {
  Vector r = op.apply(z, p);
  require_finite(r, "residual operator");
  return r;
}

}  // namespace fixinv
