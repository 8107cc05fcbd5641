#include <cmath>
#include <cstring>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "fixinv/rng.hpp"
#include "support.hpp"

using namespace fixinv;
using namespace fixinv::test;

namespace {

bool bit_identical(const Vector& a, const Vector& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_SUITE("solvers") {
  TEST_CASE("forward step on a PcaOptimal pair is done after one step") {
    const Instance inst = make_instance(LinearPairSpec{64, 16, 1, PcaOptimal{}}, 1);
    const auto r = solve(inst.pair, inst.x, config(ForwardStep{}, Schedule::fixed(1.0, 1), 1));
    CHECK(r.iterations_run == 1);
    CHECK((r.z_final - inst.z_true).norm() <= 1e-12 * inst.z_true.norm());
  }

  TEST_CASE("forward step on diag(1, 0.5) follows the closed-form recursion") {
    const auto pair = diag_1_half();
    const Vector x = pair.decode(vec({1, 1}));
    for (int k = 1; k <= 12; ++k) {
      const auto r = solve(pair, x, config(ForwardStep{}, Schedule::fixed(1.0, k), k));
      // z_2 = 0.5 z_2 + 0.5 from z_2 = 0.5: 1 - 0.5^(k+1).
      CHECK(r.z_final(0) == 1.0);
      CHECK(std::abs(r.z_final(1) - (1.0 - std::pow(0.5, k + 1))) <= 1e-15);
    }
    const auto two = solve(pair, x, config(ForwardStep{}, Schedule::fixed(1.0, 2), 2));
    CHECK(two.z_final == vec({1.0, 0.875}));
  }

  TEST_CASE("inertial KM with alpha = 0 is the forward step, bit for bit") {
    const Instance inst = make_instance(MlpPairSpec{}, 4);
    const auto sched = Schedule::cosine_warmup(0.05, 60);
    auto fsm = config(ForwardStep{}, sched, 60);
    auto km = config(InertialKM{0.0}, sched, 60);
    fsm.trace_level = km.trace_level = TraceLevel::Full;
    const auto a = solve(inst.pair, inst.x, fsm);
    const auto b = solve(inst.pair, inst.x, km);
    REQUIRE(a.trace.iterates.size() == b.trace.iterates.size());
    for (std::size_t k = 0; k < a.trace.iterates.size(); ++k) CHECK(bit_identical(a.trace.iterates[k], b.trace.iterates[k]));
  }

  TEST_CASE("inertial KM on diag(1, 0.5) converges to z_true") {
    const auto pair = diag_1_half();
    const Vector z_true = vec({1, 1});
    const Vector x = pair.decode(z_true);
    // rho = 2 lambda beta with lambda = 0.2, beta = 1.
    const auto r = solve(pair, x, config(InertialKM{0.5}, Schedule::fixed(0.4, 2000), 2000));
    CHECK((r.z_final - z_true).norm() <= 1e-8);
    CHECK(r.trace.ty_norms.size() == 2000);
  }

  TEST_CASE("inertial KM rejects alpha outside [0, 1)") {
    const auto pair = diag_1_half();
    for (double alpha : {-0.1, 1.0, 1.5})
      CHECK_THROWS_AS(solve(pair, vec({1, 1}), config(InertialKM{alpha}, Schedule::fixed(0.1, 5), 5)), Error);
  }

  TEST_CASE("Adam-free leaves an exact zero of T untouched") {
    const auto pair = identity2();
    const Vector x = vec({0.3, -2.0});
    const auto r = solve(pair, x, config(AdamFree{}, Schedule::cosine_warmup(0.01, 50), 50));
    CHECK(r.z_final == x);
  }

  TEST_CASE("Adam-free beats a small fixed forward step on diag(1, 0.5)") {
    const auto pair = diag_1_half();
    const Vector z_true = vec({1, 1});
    const Vector x = pair.decode(z_true);
    const auto adam = solve(pair, x, config(AdamFree{}, Schedule::cosine_warmup(0.01, 100), 100));
    const auto fsm = solve(pair, x, config(ForwardStep{}, Schedule::fixed(0.001, 100), 100));
    CHECK(nmse_db(adam.z_final, z_true) < nmse_db(fsm.z_final, z_true));
  }

  TEST_CASE("one gradient step with rho = 1/(2 lambda_max(D^T D)) reduces the loss") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      LinearPairSpec spec{20, 6, seed, LossySpectrum{}};
      const auto pair = build_linear_pair(spec);
      const Matrix& d = pair.linear()->decoder;
      Eigen::SelfAdjointEigenSolver<Matrix> eig(d.transpose() * d);
      const double rho = 1.0 / (2.0 * eig.eigenvalues().maxCoeff());
      Rng rng(seed);
      const Vector x = rng.normal_vector(20);
      auto cfg = config(GradDescent{}, Schedule::fixed(rho, 1), 1);
      cfg.initial_latent = rng.normal_vector(6);
      const auto r = solve(pair, x, cfg);
      CHECK((x - d * r.z_final).squaredNorm() < (x - d * *cfg.initial_latent).squaredNorm());
    }
  }

  TEST_CASE("gradient methods do not move from a stationary start") {
    const auto pair = identity2();
    const Vector x = vec({0.5, 1.5});
    for (Method m : {Method{GradDescent{}}, Method{AdamGrad{}}}) {
      const auto r = solve(pair, x, config(m, Schedule::fixed(0.1, 20), 20));
      CHECK(r.z_final == x);
    }
  }

  TEST_CASE("gradient methods need a gradient capability") {
    const OperatorPair bare(2, 2, [](const Vector& v, Precision) { return v; },
                            [](const Vector& v, Precision) { return v; });
    try {
      solve(bare, vec({1, 1}), config(GradDescent{}, Schedule::fixed(0.1, 3), 3));
      FAIL("expected NoGradient");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoGradient);
    }
  }

  TEST_CASE("gradient descent in half precision reports an underflow stall") {
    const Instance inst = make_instance(LinearPairSpec{}, 0);
    const auto r = solve(inst.pair, inst.x, config(GradDescent{}, Schedule::fixed(0.01, 100), 100, Precision::HalfEmulated));
    CHECK(r.terminated_by == Termination::UnderflowStall);
    CHECK(r.iterations_run >= kStallWindow);
    CHECK(r.iterations_run < 100);
  }

  TEST_CASE("overflow in half precision ends the run as non-finite") {
    const auto pair = diagonal_pair({1.0, 1.0});
    const Vector x = vec({60000.0, 1.0});
    const auto r = solve(pair, x, config(ForwardStep{}, Schedule::fixed(1.0, 10), 10, Precision::HalfEmulated));
    CHECK(r.terminated_by == Termination::MaxIters);
    auto cfg = config(ForwardStep{}, Schedule::fixed(1.0, 10), 10, Precision::HalfEmulated);
    cfg.initial_latent = vec({1e6, 0.0});
    const auto bad = solve(pair, x, cfg);
    CHECK(bad.terminated_by == Termination::NonFinite);
  }

  TEST_CASE("half-precision states are binary16 values") {
    const Instance inst = make_instance(MlpPairSpec{}, 2);
    for (Method m : {Method{ForwardStep{}}, Method{InertialKM{}}, Method{AdamFree{}}, Method{AdamGrad{}}}) {
      auto cfg = config(m, Schedule::cosine_warmup(0.01, 30), 30, Precision::HalfEmulated);
      cfg.trace_level = TraceLevel::Full;
      const auto r = solve(inst.pair, inst.x, cfg);
      for (const auto& z : r.trace.iterates) CHECK(round_to_half(z) == z);
    }
  }

  TEST_CASE("identical configs give bit-identical results in full precision") {
    const Instance inst = make_instance(MlpPairSpec{}, 8);
    for (Method m : {Method{ForwardStep{}}, Method{InertialKM{}}, Method{AdamFree{}}, Method{GradDescent{}},
                     Method{AdamGrad{}}}) {
      const auto cfg = config(m, Schedule::cosine_warmup(0.01, 40), 40);
      const auto a = solve(inst.pair, inst.x, cfg);
      const auto b = solve(inst.pair, inst.x, cfg);
      CHECK(bit_identical(a.z_final, b.z_final));
      CHECK(a.trace.residual_norms == b.trace.residual_norms);
    }
  }

  TEST_CASE("trace lengths match the executed steps") {
    const Instance inst = make_instance(MlpPairSpec{}, 1);
    for (Method m : {Method{ForwardStep{}}, Method{InertialKM{}}, Method{AdamFree{}}, Method{GradDescent{}},
                     Method{AdamGrad{}}}) {
      auto cfg = config(m, Schedule::fixed(0.01, 25), 25);
      cfg.trace_level = TraceLevel::Full;
      const auto r = solve(inst.pair, inst.x, cfg);
      CHECK(r.iterations_run == 25);
      CHECK(r.trace.iterates.size() == 26);
      CHECK(r.trace.step_norms.size() == 25);
      CHECK(r.trace.second_diff_norms.size() == 25);
      CHECK(r.trace.step_seconds.size() == 25);
      CHECK(r.trace.residual_norms.size() == 25);
      CHECK(r.trace.ty_norms.size() == (std::holds_alternative<InertialKM>(m) ? 25u : 0u));
      CHECK(r.z_final.size() == 16);
    }
  }

  TEST_CASE("residual tolerance stops early") {
    const auto pair = diag_1_half();
    const Vector x = pair.decode(vec({1, 1}));
    auto cfg = config(ForwardStep{}, Schedule::fixed(1.0, 200), 200);
    cfg.residual_tol = 1e-6;
    const auto r = solve(pair, x, cfg);
    CHECK(r.terminated_by == Termination::ResidualTol);
    CHECK(r.iterations_run < 200);
    CHECK(r.final_residual_norm <= 1e-6);
  }

  TEST_CASE("method names round-trip") {
    for (Method m : {Method{ForwardStep{}}, Method{InertialKM{}}, Method{AdamFree{}}, Method{GradDescent{}},
                     Method{AdamGrad{}}})
      CHECK(method_name(parse_method(method_name(m))) == method_name(m));
    CHECK_THROWS_AS(parse_method("lbfgs"), Error);
  }
}
