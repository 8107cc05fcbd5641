#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fixinv/diagnostics.hpp"
#include "fixinv/models.hpp"
#include "fixinv/solvers.hpp"
#include "fixinv/watermark.hpp"

namespace fixinv {

/// One seeded problem: pair built with the instance seed, z_true from an
/// independent stream of the same seed, x = D(z_true).
struct Instance {
  std::uint64_t seed = 0;
  OperatorPair pair;
  Vector z_true;
  Vector x;
};

Instance make_instance(const ModelSpec& model, std::uint64_t seed);

/// The Pareto and cocoercivity experiments. Instance i uses seed_base + i.
struct ExperimentConfig {
  ModelSpec model = MlpPairSpec{};
  std::vector<SolverConfig> solvers = default_solver_grid();
  std::vector<int> iterations{20, 50, 100, 200};
  int instances = 100;
  std::uint64_t seed_base = 0;
  std::string output_path = "pareto.csv";
  std::string scatter_output_path = "cocoercivity.csv";
  int k_short = 100;     ///< cocoercivity scan window
  int z_inf_step = 300;  ///< reference iterate of the scan
  SolverConfig scan_solver = default_scan_solver();
  /// Computes cosine schedules as if the budget were this many steps.
  std::optional<int> schedule_effective_K;

  /// Forward step, inertial KM (alpha 0.9) and Adam-free, all on a cosine
  /// warm-up schedule with lr_max 0.01.
  static std::vector<SolverConfig> default_solver_grid();
  /// Forward step at a fixed rate of 0.1 for 300 steps.
  static SolverConfig default_scan_solver();
};

struct TheoremSuiteConfig {
  LinearPairSpec model{64, 16, 0, LossySpectrum{}};
  int instances = 100;
  std::uint64_t seed_base = 0;
  int theorem1_iters = 5000;
  /// rho = rho_factor * beta for the forward step.
  double theorem1_rho_factor = 1.0;
  std::vector<double> alphas{0.5};
  std::vector<double> lambdas{0.2};
  int theorem2_instances = 50;
  int theorem2_iters = 2000;
  std::string output_path = "theorems.json";
};

struct HarnessConfig {
  ExperimentConfig experiment;
  TheoremSuiteConfig theorems;
  WatermarkConfig watermark;
  std::string watermark_output_path = "watermark.json";
};

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const ModelSpec& m);
nlohmann::json to_json(const Schedule& s);
nlohmann::json to_json(const SolverConfig& c);
nlohmann::json to_json(const ExperimentConfig& c);
nlohmann::json to_json(const TheoremSuiteConfig& c);
nlohmann::json to_json(const WatermarkConfig& c);
nlohmann::json to_json(const HarnessConfig& c);

// Missing keys keep their defaults; unknown keys and wrong types throw
// ConfigParse.
ModelSpec model_from_json(const nlohmann::json& j);
Schedule schedule_from_json(const nlohmann::json& j);
SolverConfig solver_from_json(const nlohmann::json& j);
ExperimentConfig experiment_from_json(const nlohmann::json& j);
TheoremSuiteConfig theorems_from_json(const nlohmann::json& j);
WatermarkConfig watermark_from_json(const nlohmann::json& j);
HarnessConfig harness_from_json(const nlohmann::json& j);

/// Reads and parses a config file. Throws IoError or ConfigParse.
HarnessConfig load_config(const std::string& path);

// ---------------------------------------------------------------------------
// Pareto benchmark

struct ParetoRow {
  std::string method;
  Precision precision = Precision::Full;
  int iterations = 0;
  double runtime_ms_mean = 0;
  double nmse_db_mean = 0;
  double nmse_db_ci95 = 0;  ///< 1.96 * sample std / sqrt(instances)
  int instances = 0;
};

/// 1.96 * sample standard deviation / sqrt(n); zero for a single sample.
double ci95(const std::vector<double>& samples);

/// Solver config for a budget of `iterations`, with the schedule stretched
/// to match and schedule_effective_K applied to cosine schedules.
SolverConfig with_budget(const SolverConfig& base, int iterations, std::optional<int> schedule_effective_K);

/// Rows ordered by solver then budget. Does not touch the filesystem.
std::vector<ParetoRow> pareto_rows(const ExperimentConfig& cfg);

inline constexpr const char* kParetoHeader =
    "method,precision,iterations,runtime_ms_mean,nmse_db_mean,nmse_db_ci95,instances";

void write_pareto_csv(std::ostream& out, const std::vector<ParetoRow>& rows);

/// Writes `path` atomically through a sibling temporary file: on failure no
/// partial file is left behind. Throws IoError.
void write_file_atomic(const std::string& path, const std::string& contents);

/// pareto_rows plus the CSV at cfg.output_path.
std::vector<ParetoRow> run_pareto(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Theorem suite

struct Theorem2Case {
  double alpha = 0;
  double lambda = 0;
  bool condition10_ok = false;
  int instances = 0;
  int failed_instances = 0;  ///< instances with any failed inequality
  int lyapunov_violations = 0;
  double lyapunov_worst_slack = INFINITY;
  double lemma_worst_slack = INFINITY;
  double hypothesis_worst_slack = INFINITY;
  double bound_B_worst_slack = INFINITY;
  bool all_ok = true;
};

struct TheoremSuiteSummary {
  int theorem1_instances = 0;
  int theorem1_violations = 0;
  double theorem1_worst_slack = INFINITY;
  double theorem1_hypothesis_worst_slack = INFINITY;
  int theorem1_hypothesis_failures = 0;
  double theorem1_max_final_residual = 0;
  int theorem1_residual_failures = 0;  ///< final ||T z^K|| above kTheorem1ResidualTarget
  int remark2_instances = 0;
  double remark2_max_dev = 0;
  std::vector<Theorem2Case> theorem2;
  /// Violations of inequalities whose hypotheses held. Cases breaking the
  /// step-size condition are reported but not counted.
  int total_violations() const;
};

inline constexpr double kTheorem1ResidualTarget = 1e-6;

/// Throws EmptyGrid when there are no instances or no (alpha, lambda) pairs.
TheoremSuiteSummary theorem_suite(const TheoremSuiteConfig& cfg);
nlohmann::json to_json(const TheoremSuiteSummary& s);

/// theorem_suite plus the JSON summary at cfg.output_path.
TheoremSuiteSummary run_theorem_suite(const TheoremSuiteConfig& cfg);

// ---------------------------------------------------------------------------
// Cocoercivity scatter and watermark

/// One scan per instance along cfg.scan_solver run for z_inf_step steps;
/// the NMSE column is taken at step k_short.
ScatterTable cocoercivity_experiment(const ExperimentConfig& cfg);

/// cocoercivity_experiment plus the CSV at cfg.scatter_output_path.
ScatterTable run_cocoercivity(const ExperimentConfig& cfg);

nlohmann::json to_json(const WatermarkResult& r);
WatermarkResult run_watermark(const WatermarkConfig& cfg, const std::string& output_path);

}  // namespace fixinv
