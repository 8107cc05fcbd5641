#include "fixinv/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "fixinv/error.hpp"

namespace fixinv {

int warmup_steps(int total_steps) { return (total_steps + 9) / 10; }

int freeze_step(int total_steps) { return (8 * total_steps) / 10; }

namespace {

double cosine_warmup_lr(double lr_max, int total, int k) {
  const int warm = warmup_steps(total);
  const int freeze = freeze_step(total);
  if (k <= warm) return lr_max * static_cast<double>(k) / static_cast<double>(warm);
  if (k > freeze) k = freeze;
  // freeze >= warm for every K >= 1, so a frozen k never re-enters the ramp.
  if (k <= warm) return lr_max;
  const double phase = std::numbers::pi * static_cast<double>(k - warm) / (0.9 * static_cast<double>(total));
  return lr_max * (1.0 + std::cos(phase)) / 2.0;
}

}  // namespace

double schedule_lr(const Schedule& s, int k) {
  if (s.total_steps < 1 || !(s.lr > 0.0)) throw Error(ErrorCode::InvalidSpec, "schedule needs lr > 0 and K >= 1");
  if (k < 1 || k > s.total_steps)
    throw Error(ErrorCode::OutOfRange,
                "step " + std::to_string(k) + " outside 1.." + std::to_string(s.total_steps));
  if (s.kind == Schedule::Kind::Fixed) return s.lr;
  int total = s.total_steps;
  if (s.effective_steps) {
    if (*s.effective_steps < 1) throw Error(ErrorCode::InvalidSpec, "effective_steps must be >= 1");
    total = *s.effective_steps;
    if (k > total) k = total;
  }
  return cosine_warmup_lr(s.lr, total, k);
}

}  // namespace fixinv
