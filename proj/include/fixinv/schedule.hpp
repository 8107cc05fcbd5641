#pragma once

#include <optional>

namespace fixinv {

/// Learning-rate schedule over steps k = 1..total_steps.
///
/// CosineWarmup ramps linearly from 0 to lr over the first ceil(K/10) steps,
/// follows lr * (1 + cos(pi * (k - w) / (0.9 K))) / 2 up to step floor(8K/10),
/// and stays frozen at that value afterwards. With effective_steps set, the
/// curve is computed for that budget and held constant past it.
struct Schedule {
  enum class Kind { Fixed, CosineWarmup };

  Kind kind = Kind::Fixed;
  double lr = 0.001;
  int total_steps = 100;
  std::optional<int> effective_steps;

  static Schedule fixed(double lr, int total_steps) { return {Kind::Fixed, lr, total_steps, std::nullopt}; }
  static Schedule cosine_warmup(double lr_max, int total_steps, std::optional<int> effective_steps = std::nullopt) {
    return {Kind::CosineWarmup, lr_max, total_steps, effective_steps};
  }
};

/// Throws OutOfRange unless 1 <= k <= total_steps, InvalidSpec for a
/// non-positive rate or budget.
double schedule_lr(const Schedule& s, int k);

int warmup_steps(int total_steps);
int freeze_step(int total_steps);

}  // namespace fixinv
