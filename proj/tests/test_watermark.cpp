#include <algorithm>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "fixinv/rng.hpp"
#include "support.hpp"

using namespace fixinv;
using namespace fixinv::test;

namespace {

// Textbook double sum, independent of the matrix formulation.
ComplexMatrix naive_dft2(const Matrix& g) {
  const Index h = g.rows(), w = g.cols();
  ComplexMatrix out(h, w);
  for (Index u = 0; u < h; ++u)
    for (Index v = 0; v < w; ++v) {
      std::complex<double> acc = 0;
      for (Index r = 0; r < h; ++r)
        for (Index c = 0; c < w; ++c) {
          const double angle = -2.0 * std::numbers::pi *
                               (static_cast<double>(u * r) / static_cast<double>(h) +
                                static_cast<double>(v * c) / static_cast<double>(w));
          acc += g(r, c) * std::polar(1.0, angle);
        }
      out(u, v) = acc;
    }
  return out;
}

int ring_size(const RingKey& k, Index h, Index w) { return static_cast<int>(ring_bins(k.radii, h, w).size()); }

}  // namespace

TEST_SUITE("watermark") {
  TEST_CASE("dft2 matches the direct double sum") {
    Rng rng(1);
    const Matrix g = rng.normal_matrix(6, 5);
    CHECK((dft2(g) - naive_dft2(g)).cwiseAbs().maxCoeff() <= 1e-10);
  }

  TEST_CASE("DFT round trip on 50 seeded grids") {
    for (std::uint64_t s = 0; s < 50; ++s) {
      Rng rng(s);
      const Matrix g = rng.normal_matrix(16, 16);
      const ComplexMatrix back = idft2(dft2(g));
      CHECK((back.real() - g).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK(back.imag().cwiseAbs().maxCoeff() <= 1e-10);
    }
  }

  TEST_CASE("zero amplitude is a null embedding") {
    Rng rng(2);
    const Matrix z = rng.normal_matrix(8, 8);
    RingKey key;
    key.amplitude = 0.0;
    CHECK((embed_ring(z, key) - z).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("embedded ring coefficients equal the key pattern") {
    for (std::uint64_t s = 0; s < 10; ++s) {
      Rng rng(s);
      const Matrix z = rng.normal_matrix(8, 8);
      const RingKey key{0, {1, 2, 3}, 2.0, 100 + s};
      const ComplexMatrix spec = dft2(embed_ring(z, key));
      const ComplexMatrix pattern = ring_pattern(key, 8, 8);
      for (const auto& [u, v] : ring_bins(key.radii, 8, 8)) CHECK(std::abs(spec(u, v) - pattern(u, v)) <= 1e-10);
      CHECK(ring_distance(spec, key) <= 1e-10);
    }
  }

  TEST_CASE("pattern is conjugate symmetric so the embedding is real") {
    for (Index h : {8, 7, 16})
      for (Index w : {8, 9, 16}) {
        const RingKey key{0, {1, 2}, 3.0, 5};
        const ComplexMatrix p = ring_pattern(key, h, w);
        for (Index u = 0; u < h; ++u)
          for (Index v = 0; v < w; ++v) CHECK(std::abs(p(u, v) - std::conj(p((h - u) % h, (w - v) % w))) <= 1e-15);
        Rng rng(3);
        ComplexMatrix spec = dft2(rng.normal_matrix(h, w));
        for (const auto& [u, v] : ring_bins(key.radii, h, w)) spec(u, v) = p(u, v);
        CHECK(idft2(spec).imag().cwiseAbs().maxCoeff() <= 1e-12);
      }
  }

  TEST_CASE("ring bins follow the rounded centred distance") {
    const auto bins = ring_bins({1}, 8, 8);
    // Distances in [0.5, 1.5): (0,+-1), (+-1,0), (+-1,+-1).
    CHECK(bins.size() == 8);
    const auto zero = ring_bins({0}, 8, 8);
    REQUIRE(zero.size() == 1);
    CHECK(zero.front() == std::pair<Index, Index>{0, 0});
  }

  TEST_CASE("distinct keys are separated on their rings") {
    const RingKey a{0, {1, 2, 3}, 0.5, 1000};
    const RingKey b{1, {1, 2, 3}, 0.5, 1001};
    Rng rng(4);
    const Matrix z = rng.normal_matrix(8, 8);
    const double d = ring_distance(dft2(embed_ring(z, a)), b);
    CHECK(d >= a.amplitude * std::sqrt(static_cast<double>(ring_size(a, 8, 8))) / 2.0);
  }

  TEST_CASE("invalid radii") {
    for (std::vector<int> radii : {std::vector<int>{4}, std::vector<int>{-1}, std::vector<int>{}}) {
      try {
        ring_bins(radii, 8, 8);
        FAIL("expected InvalidRadius");
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidRadius);
      }
    }
    CHECK_NOTHROW(ring_bins({3}, 8, 8));
    CHECK_THROWS_AS(ring_bins({3}, 8, 6), Error);
  }

  TEST_CASE("clean round trip classifies every key, in any key order") {
    WatermarkConfig cfg;
    cfg.num_keys = 4;
    auto keys = make_keys(cfg);
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
      const Matrix z = rng.normal_matrix(8, 8);
      for (const auto& k : keys) {
        CHECK(classify_ring(embed_ring(z, k), keys) == k.key_id);
        auto shuffled = keys;
        std::reverse(shuffled.begin(), shuffled.end());
        CHECK(classify_ring(embed_ring(z, k), shuffled) == k.key_id);
      }
    }
  }

  TEST_CASE("ties go to the lowest key id") {
    const RingKey k0{3, {1}, 1.0, 7};
    const RingKey k1{1, {1}, 1.0, 7};
    const Matrix z = Matrix::Zero(8, 8);
    CHECK(classify_ring(embed_ring(z, k0), {k0, k1}) == 1);
  }

  TEST_CASE("experiment errors") {
    WatermarkConfig cfg;
    cfg.strategies.clear();
    try {
      run_watermark_experiment(cfg);
      FAIL("expected EmptyStrategies");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyStrategies);
    }
    WatermarkConfig one;
    one.num_keys = 1;
    CHECK_THROWS_AS(run_watermark_experiment(one), Error);
  }

  TEST_CASE("a zero-distortion pair gives perfect accuracy for every strategy") {
    WatermarkConfig cfg;
    cfg.model = LinearPairSpec{64, 64, 0, PcaOptimal{}};
    cfg.trials = 30;
    const auto r = run_watermark_experiment(cfg);
    REQUIRE(r.outcomes.size() == 3);
    for (const auto& o : r.outcomes) {
      CHECK(o.accuracy == 100.0);
      CHECK(o.confusion.size() == 3);
      int total = 0;
      for (const auto& row : o.confusion) {
        CHECK(row.size() == 3);
        for (int c : row) total += c;
      }
      CHECK(total == 30);
    }
  }

  TEST_CASE("encoder-only recovery through a lossy pair is at least chance") {
    WatermarkConfig cfg;
    cfg.model = LinearPairSpec{128, 64, 3, LossySpectrum{}};
    cfg.strategies = {Strategy::EncoderOnly};
    cfg.trials = 60;
    const auto r = run_watermark_experiment(cfg);
    CHECK(r.outcomes.front().accuracy >= 100.0 / 3.0);
  }

  TEST_CASE("strategy names round-trip") {
    for (auto s : {Strategy::EncoderOnly, Strategy::GradBased, Strategy::GradFree})
      CHECK(parse_strategy(to_string(s)) == s);
    CHECK_THROWS_AS(parse_strategy("ddim"), Error);
  }
}
