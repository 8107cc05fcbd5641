#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include <Eigen/Core>

#include "doctest.h"
#include "support.hpp"

using namespace fixinv;
using namespace fixinv::test;

TEST_SUITE("operators") {
  TEST_CASE("residual vanishes at the exact fixed point of the identity pair") {
    const auto pair = identity2();
    const auto op = ResidualOperator::for_image(pair, vec({1, 1}), Precision::Full);
    const Vector r = apply_residual(op, vec({1, 1}), Precision::Full);
    CHECK(r == Vector::Zero(2));
  }

  TEST_CASE("residual of the diag(1, 0.5) pair at z = E(x)") {
    const auto pair = diag_1_half();
    const Vector x = pair.decode(vec({1, 1}));
    const Vector z0 = pair.encode(x);
    CHECK(z0 == vec({1.0, 0.5}));
    const auto op = ResidualOperator::for_image(pair, x, Precision::Full);
    // Oracle: M z0 - M (1, 1) with M = diag(1, 0.5).
    const Vector expected = vec({1.0 * 1.0 - 1.0, 0.5 * 0.5 - 0.5});
    CHECK(apply_residual(op, z0, Precision::Full) == expected);
    CHECK(expected == vec({0.0, -0.25}));
    CHECK(apply_residual(op, vec({1, 1}), Precision::Full) == Vector::Zero(2));
  }

  TEST_CASE("residual at z_true on seeded linear pairs is within rounding of zero") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Instance inst = make_instance(LinearPairSpec{64, 16, seed, LossySpectrum{}}, seed);
      const auto op = ResidualOperator::for_image(inst.pair, inst.x, Precision::Full);
      const Vector r = apply_residual(op, inst.z_true, Precision::Full);
      CHECK(r.norm() <= 1e-12 * op.target_latent().norm());
    }
  }

  TEST_CASE("dimension and finiteness errors") {
    const auto pair = diag_1_half();
    const auto op = ResidualOperator::for_image(pair, vec({1, 1}), Precision::Full);
    CHECK_THROWS_AS(apply_residual(op, vec({1, 2, 3}), Precision::Full), Error);
    try {
      apply_residual(op, vec({1, 2, 3}), Precision::Full);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DimensionMismatch);
    }
    try {
      apply_residual(op, vec({std::numeric_limits<double>::quiet_NaN(), 0}), Precision::Full);
      FAIL("expected NonFiniteOutput");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonFiniteOutput);
    }
    // Beyond the binary16 range the rounded output is infinite.
    const auto big = diagonal_pair({1.0, 1.0});
    const auto big_op = ResidualOperator::for_image(big, vec({1, 1}), Precision::HalfEmulated);
    try {
      apply_residual(big_op, vec({70000.0, 0.0}), Precision::HalfEmulated);
      FAIL("expected NonFiniteOutput");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonFiniteOutput);
    }
  }

  TEST_CASE("residual evaluation is deterministic") {
    const Instance inst = make_instance(MlpPairSpec{}, 3);
    const auto op = ResidualOperator::for_image(inst.pair, inst.x, Precision::HalfEmulated);
    const Vector z = inst.z_true * 0.9;
    for (auto p : {Precision::Full, Precision::HalfEmulated}) {
      const Vector a = apply_residual(op, z, p);
      const Vector b = apply_residual(op, z, p);
      CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0);
    }
  }

  TEST_CASE("round_to_half examples") {
    CHECK(round_to_half(vec({0.0, 1.0})) == vec({0.0, 1.0}));
    CHECK(round_to_half(1.0009765625) == 1.0009765625);
    CHECK(round_to_half(2.0e-25) == 0.0);
    CHECK(round_to_half(65504.0) == 65504.0);
    CHECK(round_to_half(65519.0) == 65504.0);
    CHECK(std::isinf(round_to_half(65520.0)));
    CHECK(round_to_half(-70000.0) == -std::numeric_limits<double>::infinity());
    // Smallest subnormal 2^-24; half of it ties to even (zero).
    CHECK(round_to_half(std::ldexp(1.0, -24)) == std::ldexp(1.0, -24));
    CHECK(round_to_half(std::ldexp(1.0, -25)) == 0.0);
    CHECK(round_to_half(std::ldexp(1.5, -25)) == std::ldexp(1.0, -24));
    // Ties at 1 + 2^-11 go to the even neighbour 1.
    CHECK(round_to_half(1.0 + std::ldexp(1.0, -11)) == 1.0);
    CHECK(round_to_half(1.0 + 3 * std::ldexp(1.0, -11)) == 1.0 + std::ldexp(1.0, -9));
  }

  TEST_CASE("round_to_half matches Eigen::half on float-representable inputs") {
    // Eigen converts through float, so inputs are kept float-exact to avoid
    // double rounding in the oracle.
    std::mt19937 gen(2024);
    std::uniform_real_distribution<float> mant(-1.0f, 1.0f);
    std::uniform_int_distribution<int> expo(-30, 17);
    int checked = 0;
    for (int i = 0; i < 200000; ++i) {
      const float f = std::ldexp(mant(gen), expo(gen));
      const double expected = static_cast<double>(static_cast<float>(Eigen::half(f)));
      const double got = round_to_half(static_cast<double>(f));
      if (std::isinf(expected)) {
        CHECK(std::isinf(got));
        CHECK(std::signbit(got) == std::signbit(expected));
      } else if (got != expected) {
        FAIL_CHECK("mismatch at " << f << ": " << got << " vs " << expected);
      }
      ++checked;
    }
    // Every binary16 bit pattern maps to itself.
    for (unsigned bits = 0; bits < 0x10000u; ++bits) {
      const Eigen::half h = Eigen::numext::bit_cast<Eigen::half>(static_cast<std::uint16_t>(bits));
      const float f = static_cast<float>(h);
      if (!std::isfinite(f)) continue;
      if (round_to_half(static_cast<double>(f)) != static_cast<double>(f)) FAIL_CHECK("pattern " << bits);
    }
    CHECK(checked == 200000);
  }

  TEST_CASE("round_to_half is idempotent") {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> dist(0.0, 100.0);
    for (int i = 0; i < 10000; ++i) {
      const double v = dist(gen) * std::pow(10.0, static_cast<int>(gen() % 12) - 8);
      const double once = round_to_half(v);
      CHECK(round_to_half(once) == once);
    }
  }

  TEST_CASE("composite of a nonlinear pair is unavailable") {
    const auto pair = build_pair(MlpPairSpec{});
    CHECK_FALSE(pair.linear());
    CHECK_THROWS_AS(composite(pair), Error);
  }
}
