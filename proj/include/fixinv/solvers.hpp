#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fixinv/operators.hpp"
#include "fixinv/schedule.hpp"

namespace fixinv {

// Method parameters. The step size of every method is the schedule's lr(k);
// for the inertial scheme the theorem's step is rho = 2 * lambda * beta.

struct ForwardStep {};

struct InertialKM {
  double alpha = 0.9;
};

struct AdamFree {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct GradDescent {};

struct AdamGrad {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

using Method = std::variant<ForwardStep, InertialKM, AdamFree, GradDescent, AdamGrad>;

std::string_view method_name(const Method& m);
Method parse_method(std::string_view name);
bool is_gradient_based(const Method& m);

enum class TraceLevel { Summary, Full };

struct SolverConfig {
  Method method = ForwardStep{};
  Schedule schedule = Schedule::fixed(0.001, 100);
  int max_iters = 100;
  Precision precision = Precision::Full;
  TraceLevel trace_level = TraceLevel::Summary;
  /// Stop once the method's own residual drops to this value: ||T z^k|| for
  /// the forward step and Adam-free, ||T y^k|| for the inertial scheme and
  /// ||grad|| for the gradient methods.
  std::optional<double> residual_tol;
  /// Round Adam moment buffers under HalfEmulated (off keeps them in double).
  bool round_moments = false;
  /// Overrides z^0 = E(x).
  std::optional<Vector> initial_latent;
};

/// Per-iteration record. Step k maps z^k to z^{k+1}; vectors indexed by step
/// have one entry per executed step, `iterates` has one more.
struct IterateTrace {
  std::vector<Vector> iterates;            ///< z^0..z^n, Full trace only
  std::vector<double> residual_norms;      ///< ||T z^k||; always for forward step / Adam-free, Full trace otherwise
  std::vector<double> step_norms;          ///< ||z^{k+1} - z^k||
  std::vector<double> second_diff_norms;   ///< ||z^{k+1} - 2 z^k + z^{k-1}||, z^{-1} = z^0
  std::vector<double> ty_norms;            ///< ||T y^k||, inertial scheme only
  std::vector<double> step_seconds;        ///< wall time of the update itself
};

enum class Termination { MaxIters, ResidualTol, NonFinite, UnderflowStall };

std::string_view to_string(Termination t);

struct SolveResult {
  Vector z_final;
  int iterations_run = 0;
  IterateTrace trace;
  Termination terminated_by = Termination::MaxIters;
  /// ||T z_final|| evaluated after the run; NaN when evaluation failed.
  double final_residual_norm = 0.0;

  double mean_step_seconds() const;
};

/// Consecutive zero-update steps after which a gradient method running in
/// HalfEmulated declares an underflow stall.
inline constexpr int kStallWindow = 10;

/// z^{k+1} = z^k - rho_k T z^k, z^0 = E(x).
SolveResult forward_step_solve(const OperatorPair& pair, const Vector& x, const SolverConfig& cfg);

/// y^k = z^k + alpha (z^k - z^{k-1}); z^{k+1} = y^k - rho_k T y^k, with
/// z^{-1} = z^0 = E(x).
SolveResult inertial_km_solve(const OperatorPair& pair, const Vector& x, const SolverConfig& cfg);

/// Adam with the residual T z^k standing in for the gradient.
SolveResult adam_free_solve(const OperatorPair& pair, const Vector& x, const SolverConfig& cfg);

/// z^{k+1} = z^k - rho_k grad_z ||x - D(z^k)||^2.
SolveResult gradient_descent_solve(const OperatorPair& pair, const Vector& x, const SolverConfig& cfg);

/// Adam on grad_z ||x - D(z)||^2.
SolveResult adam_grad_solve(const OperatorPair& pair, const Vector& x, const SolverConfig& cfg);

/// Dispatches on cfg.method.
SolveResult solve(const OperatorPair& pair, const Vector& x, const SolverConfig& cfg);

}  // namespace fixinv
