#include "fixinv/solvers.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <string>
#include <type_traits>

namespace fixinv {

std::string_view method_name(const Method& m) {
  return std::visit(
      [](const auto& v) -> std::string_view {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ForwardStep>) return "fsm";
        else if constexpr (std::is_same_v<T, InertialKM>) return "inertial_km";
        else if constexpr (std::is_same_v<T, AdamFree>) return "adam_free";
        else if constexpr (std::is_same_v<T, GradDescent>) return "grad_descent";
        else return "adam_grad";
      },
      m);
}

Method parse_method(std::string_view name) {
  if (name == "fsm") return ForwardStep{};
  if (name == "inertial_km") return InertialKM{};
  if (name == "adam_free") return AdamFree{};
  if (name == "grad_descent") return GradDescent{};
  if (name == "adam_grad") return AdamGrad{};
  throw Error(ErrorCode::ConfigParse, "unknown method '" + std::string(name) + "'");
}

bool is_gradient_based(const Method& m) {
  return std::holds_alternative<GradDescent>(m) || std::holds_alternative<AdamGrad>(m);
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::MaxIters: return "max_iters";
    case Termination::ResidualTol: return "residual_tol";
    case Termination::NonFinite: return "non_finite";
    case Termination::UnderflowStall: return "underflow_stall";
  }
  return "unknown";
}

double SolveResult::mean_step_seconds() const {
  const auto& s = trace.step_seconds;
  if (s.empty()) return 0.0;
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename M>
const M& expect_method(const SolverConfig& cfg, std::string_view solver) {
  const M* m = std::get_if<M>(&cfg.method);
  if (!m)
    throw Error(ErrorCode::InvalidSpec,
                std::string(solver) + " called with method " + std::string(method_name(cfg.method)));
  return *m;
}

// Shared bookkeeping for every solver loop.
class Run {
 public:
  Run(const OperatorPair& pair, const Vector& x, const SolverConfig& cfg)
      : cfg_(cfg), residual_(ResidualOperator(pair, Vector::Zero(pair.latent_dim()))) {
    if (cfg.max_iters < 0) throw Error(ErrorCode::InvalidSpec, "max_iters must be >= 0");
    require_dim(x, pair.pixel_dim(), "image");
    require_finite(x, "image");
    residual_ = ResidualOperator::for_image(pair, x, cfg.precision);
    require_finite(residual_.target_latent(), "encoder");
    if (cfg.initial_latent) {
      require_dim(*cfg.initial_latent, pair.latent_dim(), "initial latent");
      z_ = apply_precision(*cfg.initial_latent, cfg.precision);
    } else {
      z_ = residual_.target_latent();
    }
    z_prev_ = z_;
    if (full_trace()) result_.trace.iterates.push_back(z_);
  }

  bool full_trace() const { return cfg_.trace_level == TraceLevel::Full; }
  Precision precision() const { return cfg_.precision; }
  bool half() const { return cfg_.precision == Precision::HalfEmulated; }
  const ResidualOperator& residual() const { return residual_; }
  const Vector& z() const { return z_; }
  const Vector& z_prev() const { return z_prev_; }

  double lr(int step) const { return schedule_lr(cfg_.schedule, std::min(step + 1, cfg_.schedule.total_steps)); }

  bool tolerance_met(double norm) const { return cfg_.residual_tol && norm <= *cfg_.residual_tol; }

  // Extra ||T z^k|| for methods that do not compute it themselves; kept
  // outside the timed region.
  void record_extra_residual() {
    if (full_trace()) result_.trace.residual_norms.push_back(residual_.apply(z_, cfg_.precision).norm());
  }

  void record_residual(double norm) { result_.trace.residual_norms.push_back(norm); }
  void record_ty(double norm) { result_.trace.ty_norms.push_back(norm); }

  void accept(Vector z_next, double seconds) {
    auto& tr = result_.trace;
    tr.step_norms.push_back((z_next - z_).norm());
    tr.second_diff_norms.push_back((z_next - 2.0 * z_ + z_prev_).norm());
    tr.step_seconds.push_back(seconds);
    z_prev_ = std::move(z_);
    z_ = std::move(z_next);
    if (full_trace()) tr.iterates.push_back(z_);
    ++result_.iterations_run;
  }

  SolveResult finish(Termination how) {
    result_.terminated_by = how;
    result_.z_final = z_;
    const Vector r = residual_.apply(z_, cfg_.precision);
    result_.final_residual_norm = r.allFinite() ? r.norm() : std::nan("");
    return std::move(result_);
  }

 private:
  const SolverConfig& cfg_;
  ResidualOperator residual_;
  Vector z_;
  Vector z_prev_;
  SolveResult result_;
};

bool non_finite(const Error& e) { return e.code() == ErrorCode::NonFiniteOutput; }

// Adam moment update and step direction m_hat / (sqrt(v_hat) + eps).
struct AdamState {
  Vector m;
  Vector v;
  double beta1;
  double beta2;
  double epsilon;
  double beta1_pow = 1.0;
  double beta2_pow = 1.0;

  AdamState(Index dim, double b1, double b2, double eps)
      : m(Vector::Zero(dim)), v(Vector::Zero(dim)), beta1(b1), beta2(b2), epsilon(eps) {}

  Vector direction(const Vector& g, Precision p, bool round_moments) {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseAbs2();
    if (round_moments) {
      m = apply_precision(std::move(m), p);
      v = apply_precision(std::move(v), p);
    }
    beta1_pow *= beta1;
    beta2_pow *= beta2;
    const Vector m_hat = m / (1.0 - beta1_pow);
    const Vector v_hat = v / (1.0 - beta2_pow);
    return m_hat.array() / (v_hat.array().sqrt() + epsilon);
  }
};

void check_adam(double b1, double b2, double eps) {
  if (!(b1 >= 0.0 && b1 < 1.0) || !(b2 >= 0.0 && b2 < 1.0) || !(eps > 0.0))
    throw Error(ErrorCode::InvalidSpec, "Adam needs 0 <= beta1, beta2 < 1 and epsilon > 0");
}

// Shared loop of the two gradient methods. `direction` maps the gradient to
// the update direction.
template <typename Direction>
SolveResult gradient_loop(const OperatorPair& pair, const Vector& x, const SolverConfig& cfg, Direction direction) {
  if (!pair.has_gradient()) throw Error(ErrorCode::NoGradient, "gradient solver needs a gradient capability");
  Run run(pair, x, cfg);
  int zero_updates = 0;
  for (int k = 0; k < cfg.max_iters; ++k) {
    try {
      run.record_extra_residual();
      const auto t0 = Clock::now();
      const Vector g = pair.loss_gradient(x, run.z(), cfg.precision);
      require_finite(g, "loss gradient");
      if (run.tolerance_met(g.norm())) return run.finish(Termination::ResidualTol);
      Vector z_next = apply_precision(run.z() - run.lr(k) * direction(g), cfg.precision);
      require_finite(z_next, "gradient update");
      const double dt = seconds_since(t0);
      const bool unchanged = z_next == run.z();
      run.accept(std::move(z_next), dt);
      if (run.half()) {
        zero_updates = unchanged ? zero_updates + 1 : 0;
        if (zero_updates >= kStallWindow) return run.finish(Termination::UnderflowStall);
      }
    } catch (const Error& e) {
      if (!non_finite(e)) throw;
      return run.finish(Termination::NonFinite);
    }
  }
  return run.finish(Termination::MaxIters);
}

}  // namespace

SolveResult forward_step_solve(const OperatorPair& pair, const Vector& x, const SolverConfig& cfg) {
  expect_method<ForwardStep>(cfg, "forward_step_solve");
  Run run(pair, x, cfg);
  for (int k = 0; k < cfg.max_iters; ++k) {
    try {
      const auto t0 = Clock::now();
      const Vector r = apply_residual(run.residual(), run.z(), cfg.precision);
      const double rn = r.norm();
      run.record_residual(rn);
      if (run.tolerance_met(rn)) return run.finish(Termination::ResidualTol);
      Vector z_next = apply_precision(run.z() - run.lr(k) * r, cfg.precision);
      require_finite(z_next, "forward step update");
      run.accept(std::move(z_next), seconds_since(t0));
    } catch (const Error& e) {
      if (!non_finite(e)) throw;
      return run.finish(Termination::NonFinite);
    }
  }
  return run.finish(Termination::MaxIters);
}

SolveResult inertial_km_solve(const OperatorPair& pair, const Vector& x, const SolverConfig& cfg) {
  const auto& km = expect_method<InertialKM>(cfg, "inertial_km_solve");
  if (!(km.alpha >= 0.0 && km.alpha < 1.0)) throw Error(ErrorCode::InvalidSpec, "inertial KM needs 0 <= alpha < 1");
  Run run(pair, x, cfg);
  for (int k = 0; k < cfg.max_iters; ++k) {
    try {
      run.record_extra_residual();
      const auto t0 = Clock::now();
      const Vector y = apply_precision(run.z() + km.alpha * (run.z() - run.z_prev()), cfg.precision);
      const Vector ty = apply_residual(run.residual(), y, cfg.precision);
      const double tyn = ty.norm();
      run.record_ty(tyn);
      if (run.tolerance_met(tyn)) return run.finish(Termination::ResidualTol);
      Vector z_next = apply_precision(y - run.lr(k) * ty, cfg.precision);
      require_finite(z_next, "inertial update");
      run.accept(std::move(z_next), seconds_since(t0));
    } catch (const Error& e) {
      if (!non_finite(e)) throw;
      return run.finish(Termination::NonFinite);
    }
  }
  return run.finish(Termination::MaxIters);
}

SolveResult adam_free_solve(const OperatorPair& pair, const Vector& x, const SolverConfig& cfg) {
  const auto& adam = expect_method<AdamFree>(cfg, "adam_free_solve");
  check_adam(adam.beta1, adam.beta2, adam.epsilon);
  Run run(pair, x, cfg);
  AdamState state(pair.latent_dim(), adam.beta1, adam.beta2, adam.epsilon);
  const bool round_moments = cfg.round_moments && run.half();
  for (int k = 0; k < cfg.max_iters; ++k) {
    try {
      const auto t0 = Clock::now();
      const Vector r = apply_residual(run.residual(), run.z(), cfg.precision);
      const double rn = r.norm();
      run.record_residual(rn);
      if (run.tolerance_met(rn)) return run.finish(Termination::ResidualTol);
      Vector z_next =
          apply_precision(run.z() - run.lr(k) * state.direction(r, cfg.precision, round_moments), cfg.precision);
      require_finite(z_next, "Adam update");
      run.accept(std::move(z_next), seconds_since(t0));
    } catch (const Error& e) {
      if (!non_finite(e)) throw;
      return run.finish(Termination::NonFinite);
    }
  }
  return run.finish(Termination::MaxIters);
}

SolveResult gradient_descent_solve(const OperatorPair& pair, const Vector& x, const SolverConfig& cfg) {
  expect_method<GradDescent>(cfg, "gradient_descent_solve");
  return gradient_loop(pair, x, cfg, [](const Vector& g) { return g; });
}

SolveResult adam_grad_solve(const OperatorPair& pair, const Vector& x, const SolverConfig& cfg) {
  const auto& adam = expect_method<AdamGrad>(cfg, "adam_grad_solve");
  check_adam(adam.beta1, adam.beta2, adam.epsilon);
  AdamState state(pair.latent_dim(), adam.beta1, adam.beta2, adam.epsilon);
  const bool round_moments = cfg.round_moments && cfg.precision == Precision::HalfEmulated;
  return gradient_loop(pair, x, cfg,
                       [&](const Vector& g) -> Vector { return state.direction(g, cfg.precision, round_moments); });
}

SolveResult solve(const OperatorPair& pair, const Vector& x, const SolverConfig& cfg) {
  return std::visit(
      [&](const auto& m) -> SolveResult {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ForwardStep>) return forward_step_solve(pair, x, cfg);
        else if constexpr (std::is_same_v<T, InertialKM>) return inertial_km_solve(pair, x, cfg);
        else if constexpr (std::is_same_v<T, AdamFree>) return adam_free_solve(pair, x, cfg);
        else if constexpr (std::is_same_v<T, GradDescent>) return gradient_descent_solve(pair, x, cfg);
        else return adam_grad_solve(pair, x, cfg);
      },
      cfg.method);
}

}  // namespace fixinv
