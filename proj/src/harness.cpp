#include "fixinv/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "fixinv/parallel.hpp"
#include "fixinv/rng.hpp"

namespace fixinv {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTruthStream = 1;

void require_instances(int n) {
  if (n < 1) throw Error(ErrorCode::EmptyGrid, "experiment needs at least one instance");
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

Instance make_instance(const ModelSpec& model, std::uint64_t seed) {
  OperatorPair pair = build_pair(with_seed(model, seed));
  Rng rng(derive_seed(seed, kTruthStream));
  Vector z_true = rng.normal_vector(pair.latent_dim());
  Vector x = pair.decode(z_true);
  return {seed, std::move(pair), std::move(z_true), std::move(x)};
}

std::vector<SolverConfig> ExperimentConfig::default_solver_grid() {
  std::vector<SolverConfig> grid;
  for (Method m : {Method{ForwardStep{}}, Method{InertialKM{0.9}}, Method{AdamFree{}}}) {
    SolverConfig c;
    c.method = m;
    c.schedule = Schedule::cosine_warmup(0.01, 100);
    c.max_iters = 100;
    grid.push_back(c);
  }
  return grid;
}

SolverConfig ExperimentConfig::default_scan_solver() {
  SolverConfig c;
  c.method = ForwardStep{};
  c.schedule = Schedule::fixed(0.1, 300);
  c.max_iters = 300;
  return c;
}

// ---------------------------------------------------------------------------

double ci95(const std::vector<double>& samples) {
  const auto n = samples.size();
  if (n < 2) return 0.0;
  const double m = mean(samples);
  double ss = 0.0;
  for (double v : samples) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return 1.96 * sd / std::sqrt(static_cast<double>(n));
}

SolverConfig with_budget(const SolverConfig& base, int iterations, std::optional<int> schedule_effective_K) {
  if (iterations < 1) throw Error(ErrorCode::InvalidSpec, "iteration budget must be >= 1");
  SolverConfig c = base;
  c.max_iters = iterations;
  c.schedule.total_steps = iterations;
  if (schedule_effective_K && c.schedule.kind == Schedule::Kind::CosineWarmup)
    c.schedule.effective_steps = std::min(*schedule_effective_K, iterations);
  return c;
}

std::vector<ParetoRow> pareto_rows(const ExperimentConfig& cfg) {
  require_instances(cfg.instances);
  if (cfg.solvers.empty() || cfg.iterations.empty()) throw Error(ErrorCode::EmptyGrid, "empty solver grid");
  const auto n = static_cast<std::size_t>(cfg.instances);

  std::vector<SolverConfig> cells;
  for (const auto& s : cfg.solvers)
    for (int k : cfg.iterations) cells.push_back(with_budget(s, k, cfg.schedule_effective_K));

  // nmse[instance][cell], ms[instance][cell]
  std::vector<std::vector<double>> nmse(n), ms(n);
  parallel_for(n, [&](std::size_t i) {
    const Instance inst = make_instance(cfg.model, cfg.seed_base + i);
    for (const auto& c : cells) {
      const auto t0 = std::chrono::steady_clock::now();
      const SolveResult r = solve(inst.pair, inst.x, c);
      ms[i].push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
      nmse[i].push_back(r.z_final.allFinite() ? nmse_db(r.z_final, inst.z_true) : NAN);
    }
  });

  std::vector<ParetoRow> rows;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<double> db, t;
    for (std::size_t i = 0; i < n; ++i) {
      db.push_back(nmse[i][c]);
      t.push_back(ms[i][c]);
    }
    rows.push_back({std::string(method_name(cells[c].method)), cells[c].precision, cells[c].max_iters, mean(t),
                    mean(db), ci95(db), cfg.instances});
  }
  return rows;
}

void write_pareto_csv(std::ostream& out, const std::vector<ParetoRow>& rows) {
  out << kParetoHeader << '\n';
  out << std::setprecision(10);
  for (const auto& r : rows)
    out << r.method << ',' << to_string(r.precision) << ',' << r.iterations << ',' << r.runtime_ms_mean << ','
        << r.nmse_db_mean << ',' << r.nmse_db_ci95 << ',' << r.instances << '\n';
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  if (path.empty()) throw Error(ErrorCode::IoError, "empty output path");
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    out << contents;
    out.flush();
    if (!out) {
      out.close();
      std::remove(tmp.c_str());
      throw Error(ErrorCode::IoError, "failed writing '" + path + "'");
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw Error(ErrorCode::IoError, "cannot move output into '" + path + "'");
  }
}

std::vector<ParetoRow> run_pareto(const ExperimentConfig& cfg) {
  auto rows = pareto_rows(cfg);
  std::ostringstream csv;
  write_pareto_csv(csv, rows);
  write_file_atomic(cfg.output_path, csv.str());
  return rows;
}

// ---------------------------------------------------------------------------

int TheoremSuiteSummary::total_violations() const {
  int total = theorem1_violations + theorem1_hypothesis_failures;
  for (const auto& c : theorem2)
    if (c.condition10_ok) total += c.failed_instances;
  return total;
}

TheoremSuiteSummary theorem_suite(const TheoremSuiteConfig& cfg) {
  if (cfg.instances < 1 || cfg.theorem2_instances < 1 || cfg.alphas.empty() || cfg.lambdas.empty())
    throw Error(ErrorCode::EmptyGrid, "theorem suite needs instances and a non-empty (alpha, lambda) grid");
  if (!std::holds_alternative<LossySpectrum>(cfg.model.variant))
    throw Error(ErrorCode::InvalidSpec, "theorem suite runs on LossySpectrum pairs");

  TheoremSuiteSummary s;
  const auto n1 = static_cast<std::size_t>(cfg.instances);

  // Theorem 1 and the PCA exact-inverse check.
  std::vector<Theorem1Report> t1(n1);
  std::vector<double> remark(n1);
  parallel_for(n1, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seed_base + i;
    const Instance inst = make_instance(cfg.model, seed);
    const double beta = *cocoercivity_constant(inst.pair);
    SolverConfig c;
    c.method = ForwardStep{};
    c.schedule = Schedule::fixed(cfg.theorem1_rho_factor * beta, cfg.theorem1_iters);
    c.max_iters = cfg.theorem1_iters;
    c.trace_level = TraceLevel::Full;
    const SolveResult r = solve(inst.pair, inst.x, c);
    t1[i] = theorem_report(inst.pair, r.trace, c, linear_oracle_solution(inst.pair, inst.x), beta).theorem1;

    LinearPairSpec pca = cfg.model;
    pca.variant = PcaOptimal{};
    pca.seed = seed;
    remark[i] = remark2_check(build_linear_pair(pca));
  });
  s.theorem1_instances = cfg.instances;
  s.remark2_instances = cfg.instances;
  for (std::size_t i = 0; i < n1; ++i) {
    const auto& r = t1[i];
    s.theorem1_violations += r.violations;
    s.theorem1_worst_slack = std::min(s.theorem1_worst_slack, r.worst_slack);
    s.theorem1_hypothesis_worst_slack = std::min(s.theorem1_hypothesis_worst_slack, r.hypothesis_worst_slack);
    if (!r.hypothesis_ok) ++s.theorem1_hypothesis_failures;
    s.theorem1_max_final_residual = std::max(s.theorem1_max_final_residual, r.residual_final);
    if (!(r.residual_final <= kTheorem1ResidualTarget)) ++s.theorem1_residual_failures;
    s.remark2_max_dev = std::max(s.remark2_max_dev, remark[i]);
  }

  // Theorem 2 over the (alpha, lambda) grid.
  const auto n2 = static_cast<std::size_t>(cfg.theorem2_instances);
  for (double alpha : cfg.alphas)
    for (double lambda : cfg.lambdas) {
      std::vector<Theorem2Report> reps(n2);
      parallel_for(n2, [&](std::size_t i) {
        const Instance inst = make_instance(cfg.model, cfg.seed_base + i);
        const double beta = *cocoercivity_constant(inst.pair);
        SolverConfig c;
        c.method = InertialKM{alpha};
        c.schedule = Schedule::fixed(2.0 * lambda * beta, cfg.theorem2_iters);
        c.max_iters = cfg.theorem2_iters;
        c.trace_level = TraceLevel::Full;
        const SolveResult r = solve(inst.pair, inst.x, c);
        reps[i] = theorem_report(inst.pair, r.trace, c, linear_oracle_solution(inst.pair, inst.x), beta).theorem2;
      });
      Theorem2Case tc;
      tc.alpha = alpha;
      tc.lambda = lambda;
      tc.condition10_ok = lambda * (1.0 - alpha + 2.0 * alpha * alpha) < (1.0 - alpha) * (1.0 - alpha);
      tc.instances = cfg.theorem2_instances;
      for (const auto& r : reps) {
        tc.lyapunov_violations += r.lyapunov_violations;
        tc.lyapunov_worst_slack = std::min(tc.lyapunov_worst_slack, r.lyapunov_worst_slack);
        tc.lemma_worst_slack = std::min(tc.lemma_worst_slack, r.lemma_worst_slack);
        tc.hypothesis_worst_slack = std::min(tc.hypothesis_worst_slack, r.hypothesis_worst_slack);
        if (r.bound_B_evaluated) tc.bound_B_worst_slack = std::min(tc.bound_B_worst_slack, r.bound_B_worst_slack);
        const bool ok = r.hypothesis_ok && r.lemma_ok && r.lyapunov_descent_ok && (!r.bound_B_evaluated || r.bound_B_ok);
        if (!ok) ++tc.failed_instances;
      }
      tc.all_ok = tc.failed_instances == 0;
      s.theorem2.push_back(tc);
    }
  return s;
}

json to_json(const TheoremSuiteSummary& s) {
  json t2 = json::array();
  for (const auto& c : s.theorem2)
    t2.push_back({{"alpha", c.alpha},
                  {"lambda", c.lambda},
                  {"condition10_ok", c.condition10_ok},
                  {"instances", c.instances},
                  {"failed_instances", c.failed_instances},
                  {"lyapunov_violations", c.lyapunov_violations},
                  {"worst_slack",
                   {{"lyapunov", finite_or_null(c.lyapunov_worst_slack)},
                    {"lemma", finite_or_null(c.lemma_worst_slack)},
                    {"hypothesis", finite_or_null(c.hypothesis_worst_slack)},
                    {"bound_B", finite_or_null(c.bound_B_worst_slack)}}},
                  {"all_ok", c.all_ok}});
  return {{"theorem1",
           {{"instances", s.theorem1_instances},
            {"violations", s.theorem1_violations},
            {"hypothesis_failures", s.theorem1_hypothesis_failures},
            {"worst_slack",
             {{"descent", finite_or_null(s.theorem1_worst_slack)},
              {"hypothesis", finite_or_null(s.theorem1_hypothesis_worst_slack)}}},
            {"max_final_residual", finite_or_null(s.theorem1_max_final_residual)},
            {"residual_target", kTheorem1ResidualTarget},
            {"residual_failures", s.theorem1_residual_failures}}},
          {"remark2", {{"instances", s.remark2_instances}, {"max_dev_from_identity", s.remark2_max_dev}}},
          {"theorem2", t2},
          {"total_violations", s.total_violations()}};
}

TheoremSuiteSummary run_theorem_suite(const TheoremSuiteConfig& cfg) {
  auto s = theorem_suite(cfg);
  write_file_atomic(cfg.output_path, to_json(s).dump(2) + "\n");
  return s;
}

// ---------------------------------------------------------------------------

ScatterTable cocoercivity_experiment(const ExperimentConfig& cfg) {
  require_instances(cfg.instances);
  if (cfg.k_short < 1 || cfg.z_inf_step <= cfg.k_short)
    throw Error(ErrorCode::InvalidSpec, "cocoercivity scan needs 1 <= k_short < z_inf_step");
  const auto n = static_cast<std::size_t>(cfg.instances);
  std::vector<CocoercivityScan> scans(n);
  std::vector<double> db(n);
  parallel_for(n, [&](std::size_t i) {
    const Instance inst = make_instance(cfg.model, cfg.seed_base + i);
    SolverConfig c = with_budget(cfg.scan_solver, cfg.z_inf_step, cfg.schedule_effective_K);
    c.trace_level = TraceLevel::Full;
    const SolveResult r = solve(inst.pair, inst.x, c);
    const auto& it = r.trace.iterates;
    if (static_cast<int>(it.size()) <= cfg.k_short)
      throw Error(ErrorCode::TraceTooShort, "scan trajectory stopped before the window ended");
    scans[i] = cocoercivity_scan(inst.pair, r.trace, it.back(), cfg.k_short, c.precision);
    db[i] = nmse_db(it[static_cast<std::size_t>(cfg.k_short)], inst.z_true);
  });
  return scatter_export(scans, db);
}

ScatterTable run_cocoercivity(const ExperimentConfig& cfg) {
  auto table = cocoercivity_experiment(cfg);
  std::ostringstream csv;
  write_scatter_csv(csv, table);
  write_file_atomic(cfg.scatter_output_path, csv.str());
  return table;
}

json to_json(const WatermarkResult& r) {
  json j = json::object();
  for (const auto& o : r.outcomes)
    j[std::string(to_string(o.strategy))] = {
        {"accuracy", o.accuracy}, {"correct", o.correct}, {"trials", o.trials}, {"confusion", o.confusion}};
  return j;
}

WatermarkResult run_watermark(const WatermarkConfig& cfg, const std::string& output_path) {
  auto r = run_watermark_experiment(cfg);
  write_file_atomic(output_path, to_json(r).dump(2) + "\n");
  return r;
}

}  // namespace fixinv
