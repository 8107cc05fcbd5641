#include "fixinv/watermark.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "fixinv/parallel.hpp"
#include "fixinv/rng.hpp"

namespace fixinv {

LatentGrid to_grid(const Vector& z, Index rows, Index cols) {
  require_dim(z, rows * cols, "latent grid");
  LatentGrid g(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) g(r, c) = z(r * cols + c);
  return g;
}

Vector to_vector(const LatentGrid& grid) {
  Vector z(grid.size());
  for (Index r = 0; r < grid.rows(); ++r)
    for (Index c = 0; c < grid.cols(); ++c) z(r * grid.cols() + c) = grid(r, c);
  return z;
}

namespace {

Index signed_frequency(Index k, Index n) { return 2 * k < n ? k : k - n; }

}  // namespace

std::vector<std::pair<Index, Index>> ring_bins(const std::vector<int>& radii, Index rows, Index cols) {
  if (radii.empty()) throw Error(ErrorCode::InvalidRadius, "key has no rings");
  const Index limit = std::min(rows, cols);
  for (int r : radii)
    if (r < 0 || 2 * static_cast<Index>(r) >= limit)
      throw Error(ErrorCode::InvalidRadius, "radius " + std::to_string(r) + " outside [0, min(H,W)/2)");

  std::vector<std::pair<Index, Index>> bins;
  for (Index u = 0; u < rows; ++u)
    for (Index v = 0; v < cols; ++v) {
      const auto fu = static_cast<double>(signed_frequency(u, rows));
      const auto fv = static_cast<double>(signed_frequency(v, cols));
      const double dist = std::hypot(fu, fv);
      for (int r : radii)
        if (dist >= r - 0.5 && dist < r + 0.5) {
          bins.emplace_back(u, v);
          break;
        }
    }
  return bins;
}

ComplexMatrix ring_pattern(const RingKey& key, Index rows, Index cols) {
  if (!(key.amplitude >= 0.0)) throw Error(ErrorCode::InvalidSpec, "ring amplitude must be non-negative");
  ComplexMatrix pattern = ComplexMatrix::Zero(rows, cols);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> assigned =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(rows, cols, false);
  Rng rng(key.phase_seed);
  for (const auto& [u, v] : ring_bins(key.radii, rows, cols)) {
    if (assigned(u, v)) continue;
    const Index pu = (rows - u) % rows;
    const Index pv = (cols - v) % cols;
    if (pu == u && pv == v) {
      // Self-conjugate bin: the value must be real.
      pattern(u, v) = rng.uniform() < 0.5 ? key.amplitude : -key.amplitude;
    } else {
      const auto value = std::polar(key.amplitude, 2.0 * std::numbers::pi * rng.uniform());
      pattern(u, v) = value;
      pattern(pu, pv) = std::conj(value);
      assigned(pu, pv) = true;
    }
    assigned(u, v) = true;
  }
  return pattern;
}

LatentGrid embed_ring(const LatentGrid& z, const RingKey& key) {
  if (key.amplitude == 0.0) {
    ring_bins(key.radii, z.rows(), z.cols());
    return z;
  }
  ComplexMatrix spectrum = dft2(z);
  const ComplexMatrix pattern = ring_pattern(key, z.rows(), z.cols());
  for (const auto& [u, v] : ring_bins(key.radii, z.rows(), z.cols())) spectrum(u, v) = pattern(u, v);
  return idft2(spectrum).real();
}

double ring_distance(const ComplexMatrix& spectrum, const RingKey& key) {
  const ComplexMatrix pattern = ring_pattern(key, spectrum.rows(), spectrum.cols());
  double sq = 0.0;
  for (const auto& [u, v] : ring_bins(key.radii, spectrum.rows(), spectrum.cols()))
    sq += std::norm(spectrum(u, v) - pattern(u, v));
  return std::sqrt(sq);
}

int classify_ring(const LatentGrid& z_est, const std::vector<RingKey>& keys) {
  if (keys.empty()) throw Error(ErrorCode::EmptyInput, "classification needs keys");
  const ComplexMatrix spectrum = dft2(z_est);
  int best_id = std::numeric_limits<int>::max();
  double best = std::numeric_limits<double>::infinity();
  for (const auto& key : keys) {
    const double d = ring_distance(spectrum, key);
    if (d < best || (d == best && key.key_id < best_id)) {
      best = d;
      best_id = key.key_id;
    }
  }
  return best_id;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::EncoderOnly: return "encoder_only";
    case Strategy::GradBased: return "grad_based";
    case Strategy::GradFree: return "grad_free";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "encoder_only") return Strategy::EncoderOnly;
  if (name == "grad_based") return Strategy::GradBased;
  if (name == "grad_free") return Strategy::GradFree;
  throw Error(ErrorCode::ConfigParse, "unknown strategy '" + std::string(name) + "'");
}

WatermarkConfig::WatermarkConfig() {
  grad_free.method = AdamFree{};
  grad_free.schedule = Schedule::cosine_warmup(0.01, 100);
  grad_free.max_iters = 100;
  grad_based.method = AdamGrad{};
  grad_based.schedule = Schedule::cosine_warmup(0.1, 100);
  grad_based.max_iters = 100;
}

std::vector<RingKey> make_keys(const WatermarkConfig& cfg) {
  if (cfg.num_keys < 2) throw Error(ErrorCode::InvalidSpec, "watermark classification needs at least two keys");
  std::vector<RingKey> keys;
  for (int i = 0; i < cfg.num_keys; ++i)
    keys.push_back({i, cfg.radii, cfg.amplitude, cfg.key_seed + static_cast<std::uint64_t>(i)});
  return keys;
}

WatermarkResult run_watermark_experiment(const WatermarkConfig& cfg) {
  return run_watermark_experiment(cfg, build_pair(cfg.model));
}

WatermarkResult run_watermark_experiment(const WatermarkConfig& cfg, const OperatorPair& pair) {
  if (cfg.strategies.empty()) throw Error(ErrorCode::EmptyStrategies, "no recovery strategies requested");
  if (cfg.trials < 1) throw Error(ErrorCode::InvalidSpec, "trials must be >= 1");
  if (cfg.grid_rows * cfg.grid_cols != pair.latent_dim())
    throw Error(ErrorCode::DimensionMismatch, "grid shape does not match the latent dimension");
  const auto keys = make_keys(cfg);

  const std::size_t n_strat = cfg.strategies.size();
  // predictions[trial][strategy]
  std::vector<std::vector<int>> predictions(static_cast<std::size_t>(cfg.trials), std::vector<int>(n_strat));
  parallel_for(static_cast<std::size_t>(cfg.trials), [&](std::size_t t) {
    Rng rng(cfg.seed_base + t);
    const RingKey& key = keys[t % keys.size()];
    const LatentGrid z_true = to_grid(rng.normal_vector(pair.latent_dim()), cfg.grid_rows, cfg.grid_cols);
    const Vector x = pair.decode(to_vector(embed_ring(z_true, key)));
    for (std::size_t s = 0; s < n_strat; ++s) {
      Vector z_hat;
      switch (cfg.strategies[s]) {
        case Strategy::EncoderOnly: z_hat = pair.encode(x); break;
        case Strategy::GradBased: z_hat = solve(pair, x, cfg.grad_based).z_final; break;
        case Strategy::GradFree: z_hat = solve(pair, x, cfg.grad_free).z_final; break;
      }
      predictions[t][s] = classify_ring(to_grid(z_hat, cfg.grid_rows, cfg.grid_cols), keys);
    }
  });

  WatermarkResult result;
  for (std::size_t s = 0; s < n_strat; ++s) {
    StrategyOutcome out;
    out.strategy = cfg.strategies[s];
    out.trials = cfg.trials;
    out.confusion.assign(keys.size(), std::vector<int>(keys.size(), 0));
    for (std::size_t t = 0; t < predictions.size(); ++t) {
      const auto truth = static_cast<std::size_t>(keys[t % keys.size()].key_id);
      const auto pred = static_cast<std::size_t>(predictions[t][s]);
      ++out.confusion[truth][pred];
      if (truth == pred) ++out.correct;
    }
    out.accuracy = 100.0 * out.correct / out.trials;
    result.outcomes.push_back(std::move(out));
  }
  return result;
}

}  // namespace fixinv
