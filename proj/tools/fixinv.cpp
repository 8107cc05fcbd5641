// Command-line front end for the inversion experiments.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fixinv/harness.hpp"

using namespace fixinv;

namespace {

enum Exit { kOk = 0, kConfigError = 1, kNumericError = 2 };

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> precision;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
  cmd->add_option("--config", c.config, "JSON config; defaults apply when omitted")->check(CLI::ExistingFile);
  if (with_out) cmd->add_option("--out", c.out, "output path (overrides the config)");
  cmd->add_option("--seed", c.seed, "seed base (overrides the config)");
  cmd->add_option("--precision", c.precision, "full or half")->check(CLI::IsMember({"full", "half"}));
  cmd->add_flag("--quiet", c.quiet, "suppress the summary on stdout");
}

HarnessConfig load(const Common& c) { return c.config.empty() ? HarnessConfig{} : load_config(c.config); }

void apply_precision_override(const Common& c, SolverConfig& s) {
  if (c.precision) s.precision = parse_precision(*c.precision);
}

int cmd_solve(const Common& c, const std::optional<std::string>& method, std::optional<int> k,
              std::optional<double> lr) {
  const HarnessConfig cfg = load(c);
  const auto& exp = cfg.experiment;
  SolverConfig s = exp.solvers.empty() ? SolverConfig{} : exp.solvers.front();
  if (method) s.method = parse_method(*method);
  if (lr) s.schedule.lr = *lr;
  s = with_budget(s, k.value_or(s.max_iters), exp.schedule_effective_K);
  apply_precision_override(c, s);

  const Instance inst = make_instance(exp.model, c.seed.value_or(exp.seed_base));
  const SolveResult r = solve(inst.pair, inst.x, s);
  if (!c.quiet) {
    std::printf("method=%s precision=%s iterations=%d terminated_by=%s\n", std::string(method_name(s.method)).c_str(),
                std::string(to_string(s.precision)).c_str(), r.iterations_run,
                std::string(to_string(r.terminated_by)).c_str());
    if (r.z_final.allFinite()) std::printf("nmse_db=%.6f\n", nmse_db(r.z_final, inst.z_true));
    std::printf("residual_norm=%.6e\n", r.final_residual_norm);
  }
  const bool failed = r.terminated_by == Termination::NonFinite || r.terminated_by == Termination::UnderflowStall;
  return failed ? kNumericError : kOk;
}

int cmd_pareto(const Common& c) {
  HarnessConfig cfg = load(c);
  auto& exp = cfg.experiment;
  if (!c.out.empty()) exp.output_path = c.out;
  if (c.seed) exp.seed_base = *c.seed;
  for (auto& s : exp.solvers) apply_precision_override(c, s);
  const auto rows = run_pareto(exp);
  if (!c.quiet) write_pareto_csv(std::cout, rows);
  return kOk;
}

int cmd_theorems(const Common& c) {
  HarnessConfig cfg = load(c);
  auto& th = cfg.theorems;
  if (!c.out.empty()) th.output_path = c.out;
  if (c.seed) th.seed_base = *c.seed;
  const auto summary = run_theorem_suite(th);
  if (!c.quiet) std::cout << to_json(summary).dump(2) << '\n';
  return kOk;
}

int cmd_cocoercivity(const Common& c) {
  HarnessConfig cfg = load(c);
  auto& exp = cfg.experiment;
  if (!c.out.empty()) exp.scatter_output_path = c.out;
  if (c.seed) exp.seed_base = *c.seed;
  apply_precision_override(c, exp.scan_solver);
  const auto table = run_cocoercivity(exp);
  if (!c.quiet) {
    std::printf("instances=%zu\n", table.rows.size());
    if (table.fit) std::printf("fit slope=%.6g intercept=%.6g\n", table.fit->slope, table.fit->intercept);
  }
  return kOk;
}

int cmd_watermark(const Common& c) {
  HarnessConfig cfg = load(c);
  auto& wm = cfg.watermark;
  if (c.seed) wm.seed_base = *c.seed;
  apply_precision_override(c, wm.grad_free);
  apply_precision_override(c, wm.grad_based);
  const auto result = run_watermark(wm, c.out.empty() ? cfg.watermark_output_path : c.out);
  if (!c.quiet)
    for (const auto& o : result.outcomes)
      std::printf("%s accuracy=%.1f%% (%d/%d)\n", std::string(to_string(o.strategy)).c_str(), o.accuracy, o.correct,
                  o.trials);
  return kOk;
}

int cmd_schedule_dump(int k_total, double lr_max, const std::string& kind, std::optional<int> effective) {
  const Schedule s = kind == "fixed" ? Schedule::fixed(lr_max, k_total)
                                     : Schedule::cosine_warmup(lr_max, k_total, effective);
  std::printf("k,lr\n");
  for (int k = 1; k <= k_total; ++k) std::printf("%d,%.17g\n", k, schedule_lr(s, k));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-point decoder inversion experiments"};
  app.require_subcommand(1);

  Common common;
  std::optional<std::string> method;
  std::optional<int> solve_k;
  std::optional<double> solve_lr;
  auto* solve_cmd = app.add_subcommand("solve", "invert one seeded instance and print NMSE and residual");
  add_common(solve_cmd, common, false);
  solve_cmd->add_option("--method", method, "fsm, inertial_km, adam_free, grad_descent or adam_grad");
  solve_cmd->add_option("--K", solve_k, "iteration budget");
  solve_cmd->add_option("--lr-max", solve_lr, "step size or peak learning rate");

  auto* pareto_cmd = app.add_subcommand("pareto", "runtime against NMSE over the solver grid (CSV)");
  add_common(pareto_cmd, common);
  auto* theorems_cmd = app.add_subcommand("theorems", "batch theorem checks (JSON summary)");
  add_common(theorems_cmd, common);
  auto* coco_cmd = app.add_subcommand("cocoercivity", "cocoercivity scan scatter (CSV)");
  add_common(coco_cmd, common);
  auto* wm_cmd = app.add_subcommand("watermark", "ring-key classification per recovery strategy (JSON)");
  add_common(wm_cmd, common);

  int dump_k = 100;
  double dump_lr = 0.01;
  std::string dump_kind = "cosine_warmup";
  std::optional<int> dump_effective;
  auto* dump_cmd = app.add_subcommand("schedule-dump", "print lr(k) for k = 1..K");
  dump_cmd->add_option("--K", dump_k, "total steps")->check(CLI::PositiveNumber);
  dump_cmd->add_option("--lr-max", dump_lr, "peak learning rate")->check(CLI::PositiveNumber);
  dump_cmd->add_option("--kind", dump_kind, "cosine_warmup or fixed")->check(CLI::IsMember({"cosine_warmup", "fixed"}));
  dump_cmd->add_option("--effective-K", dump_effective, "compute the curve as if K were this value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kConfigError;
  }

  try {
    if (*solve_cmd) return cmd_solve(common, method, solve_k, solve_lr);
    if (*pareto_cmd) return cmd_pareto(common);
    if (*theorems_cmd) return cmd_theorems(common);
    if (*coco_cmd) return cmd_cocoercivity(common);
    if (*wm_cmd) return cmd_watermark(common);
    if (*dump_cmd) return cmd_schedule_dump(dump_k, dump_lr, dump_kind, dump_effective);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == ErrorCode::NonFiniteOutput ? kNumericError : kConfigError;
  }
  std::cerr << app.help();
  return kConfigError;
}
