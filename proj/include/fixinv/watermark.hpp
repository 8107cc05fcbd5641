#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "fixinv/dft.hpp"
#include "fixinv/models.hpp"
#include "fixinv/solvers.hpp"

namespace fixinv {

/// A latent reshaped to H x W, row-major.
using LatentGrid = Matrix;

LatentGrid to_grid(const Vector& z, Index rows, Index cols);
Vector to_vector(const LatentGrid& grid);

/// Ring-pattern key written into the Fourier transform of a latent.
struct RingKey {
  int key_id = 0;
  std::vector<int> radii{1, 2, 3};
  double amplitude = 0.5;
  std::uint64_t phase_seed = 0;
};

/// Frequency bins (row, col) whose centred distance from the zero-frequency
/// bin rounds to one of the radii, in row-major order. Throws InvalidRadius
/// unless every radius satisfies 0 <= r < min(H, W) / 2.
std::vector<std::pair<Index, Index>> ring_bins(const std::vector<int>& radii, Index rows, Index cols);

/// Key values on its ring bins (zero elsewhere): amplitude times seeded
/// unit-modulus numbers, conjugate-symmetric so the inverse is real.
ComplexMatrix ring_pattern(const RingKey& key, Index rows, Index cols);

LatentGrid embed_ring(const LatentGrid& z, const RingKey& key);

/// l2 distance between the spectrum and the key pattern on the key's rings.
double ring_distance(const ComplexMatrix& spectrum, const RingKey& key);

/// Key id minimising ring_distance; ties go to the lowest key_id.
int classify_ring(const LatentGrid& z_est, const std::vector<RingKey>& keys);

// ---------------------------------------------------------------------------

enum class Strategy { EncoderOnly, GradBased, GradFree };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

struct WatermarkConfig {
  ModelSpec model = MlpPairSpec{{256, 128, 64}, {64, 128, 256}};
  Index grid_rows = 8;
  Index grid_cols = 8;
  int num_keys = 3;
  std::vector<int> radii{1, 2, 3};
  double amplitude = 0.5;
  std::uint64_t key_seed = 1000;  ///< key i uses phase seed key_seed + i
  int trials = 100;
  std::uint64_t seed_base = 0;    ///< trial t draws from seed_base + t
  std::vector<Strategy> strategies{Strategy::EncoderOnly, Strategy::GradBased, Strategy::GradFree};
  SolverConfig grad_free;
  SolverConfig grad_based;

  WatermarkConfig();
};

struct StrategyOutcome {
  Strategy strategy = Strategy::EncoderOnly;
  int correct = 0;
  int trials = 0;
  double accuracy = 0.0;                   ///< percent
  std::vector<std::vector<int>> confusion;  ///< [true key][predicted key]
};

struct WatermarkResult {
  std::vector<StrategyOutcome> outcomes;
};

std::vector<RingKey> make_keys(const WatermarkConfig& cfg);

/// Throws EmptyStrategies when cfg.strategies is empty.
WatermarkResult run_watermark_experiment(const WatermarkConfig& cfg);
WatermarkResult run_watermark_experiment(const WatermarkConfig& cfg, const OperatorPair& pair);

}  // namespace fixinv
