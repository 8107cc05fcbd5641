#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>

#include "fixinv/harness.hpp"

namespace fixinv {

using nlohmann::json;

namespace {

[[noreturn]] void parse_error(const std::string& what) { throw Error(ErrorCode::ConfigParse, what); }

// Reads optional keys of one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) parse_error(context_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.is_number_integer() && !v.is_number_unsigned()) throw std::invalid_argument("expected a non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("expected a string");
      }
      out = v.get<T>();
    } catch (const std::exception& e) {
      parse_error(context_ + "." + key + ": " + e.what());
    }
  }

  template <typename T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    T value{};
    get(key, value);
    out = value;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) parse_error(context_ + ": unknown key '" + item.key() + "'");
  }

 private:
  const json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

std::string_view activation_name(Activation::Kind k) {
  switch (k) {
    case Activation::Kind::Tanh: return "tanh";
    case Activation::Kind::LeakyRelu: return "leaky_relu";
    case Activation::Kind::Identity: return "identity";
  }
  return "tanh";
}

Activation::Kind parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::Kind::Tanh;
  if (name == "leaky_relu") return Activation::Kind::LeakyRelu;
  if (name == "identity") return Activation::Kind::Identity;
  parse_error("unknown activation '" + name + "'");
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::vector<Index> read_widths(ObjectReader& r, const char* key, std::vector<Index> fallback) {
  std::vector<long long> widths(fallback.begin(), fallback.end());
  r.get(key, widths);
  return {widths.begin(), widths.end()};
}

LinearPairSpec linear_from_json(ObjectReader& r) {
  LinearPairSpec spec;
  long long pixel = spec.pixel_dim, latent = spec.latent_dim;
  r.get("pixel_dim", pixel);
  r.get("latent_dim", latent);
  spec.pixel_dim = pixel;
  spec.latent_dim = latent;
  r.get("seed", spec.seed);
  std::string variant = "pca_optimal";
  r.get("variant", variant);
  if (variant == "pca_optimal") {
    spec.variant = PcaOptimal{};
  } else if (variant == "lossy_spectrum") {
    LossySpectrum lossy;
    r.get("eigenvalues", lossy.eigenvalues);
    r.get("identity_rotation", lossy.identity_rotation);
    r.get("condition_number", lossy.condition_number);
    spec.variant = lossy;
  } else {
    parse_error("model.variant: unknown linear variant '" + variant + "'");
  }
  return spec;
}

MlpPairSpec mlp_from_json(ObjectReader& r) {
  MlpPairSpec spec;
  spec.encoder_widths = read_widths(r, "encoder_widths", spec.encoder_widths);
  spec.decoder_widths = read_widths(r, "decoder_widths", spec.decoder_widths);
  std::string activation(activation_name(spec.activation.kind));
  r.get("activation", activation);
  spec.activation.kind = parse_activation(activation);
  r.get("leaky_slope", spec.activation.slope);
  r.get("seed", spec.seed);
  r.get("weight_scale", spec.weight_scale);
  r.get("encoder_perturbation", spec.encoder_perturbation);
  return spec;
}

std::vector<SolverConfig> solvers_from_json(const json& j, const std::string& context) {
  if (!j.is_array()) parse_error(context + ": expected an array");
  std::vector<SolverConfig> out;
  for (const auto& item : j) out.push_back(solver_from_json(item));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

json to_json(const ModelSpec& m) {
  if (const auto* lin = std::get_if<LinearPairSpec>(&m)) {
    json j{{"type", "linear"}, {"pixel_dim", lin->pixel_dim}, {"latent_dim", lin->latent_dim}, {"seed", lin->seed}};
    if (const auto* lossy = std::get_if<LossySpectrum>(&lin->variant)) {
      j["variant"] = "lossy_spectrum";
      j["eigenvalues"] = lossy->eigenvalues;
      j["identity_rotation"] = lossy->identity_rotation;
      j["condition_number"] = lossy->condition_number;
    } else {
      j["variant"] = "pca_optimal";
    }
    return j;
  }
  const auto& mlp = std::get<MlpPairSpec>(m);
  return {{"type", "mlp"},
          {"encoder_widths", mlp.encoder_widths},
          {"decoder_widths", mlp.decoder_widths},
          {"activation", activation_name(mlp.activation.kind)},
          {"leaky_slope", mlp.activation.slope},
          {"seed", mlp.seed},
          {"weight_scale", mlp.weight_scale},
          {"encoder_perturbation", mlp.encoder_perturbation}};
}

ModelSpec model_from_json(const json& j) {
  ObjectReader r(j, "model");
  std::string type = "mlp";
  r.get("type", type);
  ModelSpec spec;
  if (type == "linear") spec = linear_from_json(r);
  else if (type == "mlp") spec = mlp_from_json(r);
  else parse_error("model.type: unknown model type '" + type + "'");
  r.finish();
  return spec;
}

json to_json(const Schedule& s) {
  return {{"kind", s.kind == Schedule::Kind::Fixed ? "fixed" : "cosine_warmup"},
          {"lr", s.lr},
          {"total_steps", s.total_steps},
          {"effective_steps", optional_json(s.effective_steps)}};
}

Schedule schedule_from_json(const json& j) {
  ObjectReader r(j, "schedule");
  Schedule s;
  std::string kind = "fixed";
  r.get("kind", kind);
  if (kind == "fixed") s.kind = Schedule::Kind::Fixed;
  else if (kind == "cosine_warmup") s.kind = Schedule::Kind::CosineWarmup;
  else parse_error("schedule.kind: unknown schedule '" + kind + "'");
  r.get("lr", s.lr);
  r.get("total_steps", s.total_steps);
  r.get("effective_steps", s.effective_steps);
  r.finish();
  return s;
}

json to_json(const SolverConfig& c) {
  json j{{"method", method_name(c.method)}};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, InertialKM>) {
          j["alpha"] = m.alpha;
        } else if constexpr (std::is_same_v<T, AdamFree> || std::is_same_v<T, AdamGrad>) {
          j["beta1"] = m.beta1;
          j["beta2"] = m.beta2;
          j["epsilon"] = m.epsilon;
        }
      },
      c.method);
  j["schedule"] = to_json(c.schedule);
  j["max_iters"] = c.max_iters;
  j["precision"] = to_string(c.precision);
  j["trace_level"] = c.trace_level == TraceLevel::Full ? "full" : "summary";
  j["residual_tol"] = optional_json(c.residual_tol);
  j["round_moments"] = c.round_moments;
  return j;
}

SolverConfig solver_from_json(const json& j) {
  ObjectReader r(j, "solver");
  SolverConfig c;
  std::string method(method_name(c.method));
  r.get("method", method);
  c.method = parse_method(method);
  std::visit(
      [&](auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, InertialKM>) {
          r.get("alpha", m.alpha);
        } else if constexpr (std::is_same_v<T, AdamFree> || std::is_same_v<T, AdamGrad>) {
          r.get("beta1", m.beta1);
          r.get("beta2", m.beta2);
          r.get("epsilon", m.epsilon);
        }
      },
      c.method);
  if (r.has("schedule")) c.schedule = schedule_from_json(r.raw("schedule"));
  r.get("max_iters", c.max_iters);
  std::string precision(to_string(c.precision));
  r.get("precision", precision);
  try {
    c.precision = parse_precision(precision);
  } catch (const Error& e) {
    parse_error(std::string("solver.precision: ") + e.what());
  }
  std::string trace = "summary";
  r.get("trace_level", trace);
  if (trace == "summary") c.trace_level = TraceLevel::Summary;
  else if (trace == "full") c.trace_level = TraceLevel::Full;
  else parse_error("solver.trace_level: unknown level '" + trace + "'");
  r.get("residual_tol", c.residual_tol);
  r.get("round_moments", c.round_moments);
  r.finish();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json solvers = json::array();
  for (const auto& s : c.solvers) solvers.push_back(to_json(s));
  return {{"model", to_json(c.model)},
          {"solvers", solvers},
          {"iterations", c.iterations},
          {"instances", c.instances},
          {"seed_base", c.seed_base},
          {"output_path", c.output_path},
          {"scatter_output_path", c.scatter_output_path},
          {"k_short", c.k_short},
          {"z_inf_step", c.z_inf_step},
          {"scan_solver", to_json(c.scan_solver)},
          {"schedule_effective_K", optional_json(c.schedule_effective_K)}};
}

ExperimentConfig experiment_from_json(const json& j) {
  ObjectReader r(j, "experiment");
  ExperimentConfig c;
  if (r.has("model")) c.model = model_from_json(r.raw("model"));
  if (r.has("solvers")) c.solvers = solvers_from_json(r.raw("solvers"), "experiment.solvers");
  r.get("iterations", c.iterations);
  r.get("instances", c.instances);
  r.get("seed_base", c.seed_base);
  r.get("output_path", c.output_path);
  r.get("scatter_output_path", c.scatter_output_path);
  r.get("k_short", c.k_short);
  r.get("z_inf_step", c.z_inf_step);
  if (r.has("scan_solver")) c.scan_solver = solver_from_json(r.raw("scan_solver"));
  r.get("schedule_effective_K", c.schedule_effective_K);
  r.finish();
  return c;
}

json to_json(const TheoremSuiteConfig& c) {
  return {{"model", to_json(ModelSpec{c.model})},
          {"instances", c.instances},
          {"seed_base", c.seed_base},
          {"theorem1_iters", c.theorem1_iters},
          {"theorem1_rho_factor", c.theorem1_rho_factor},
          {"alphas", c.alphas},
          {"lambdas", c.lambdas},
          {"theorem2_instances", c.theorem2_instances},
          {"theorem2_iters", c.theorem2_iters},
          {"output_path", c.output_path}};
}

TheoremSuiteConfig theorems_from_json(const json& j) {
  ObjectReader r(j, "theorems");
  TheoremSuiteConfig c;
  if (r.has("model")) {
    const ModelSpec m = model_from_json(r.raw("model"));
    if (!std::holds_alternative<LinearPairSpec>(m)) parse_error("theorems.model: the theorem suite needs a linear pair");
    c.model = std::get<LinearPairSpec>(m);
  }
  r.get("instances", c.instances);
  r.get("seed_base", c.seed_base);
  r.get("theorem1_iters", c.theorem1_iters);
  r.get("theorem1_rho_factor", c.theorem1_rho_factor);
  r.get("alphas", c.alphas);
  r.get("lambdas", c.lambdas);
  r.get("theorem2_instances", c.theorem2_instances);
  r.get("theorem2_iters", c.theorem2_iters);
  r.get("output_path", c.output_path);
  r.finish();
  return c;
}

json to_json(const WatermarkConfig& c) {
  json strategies = json::array();
  for (auto s : c.strategies) strategies.push_back(to_string(s));
  return {{"model", to_json(c.model)},
          {"grid_rows", c.grid_rows},
          {"grid_cols", c.grid_cols},
          {"num_keys", c.num_keys},
          {"radii", c.radii},
          {"amplitude", c.amplitude},
          {"key_seed", c.key_seed},
          {"trials", c.trials},
          {"seed_base", c.seed_base},
          {"strategies", strategies},
          {"grad_free", to_json(c.grad_free)},
          {"grad_based", to_json(c.grad_based)}};
}

WatermarkConfig watermark_from_json(const json& j) {
  ObjectReader r(j, "watermark");
  WatermarkConfig c;
  if (r.has("model")) c.model = model_from_json(r.raw("model"));
  long long rows = c.grid_rows, cols = c.grid_cols;
  r.get("grid_rows", rows);
  r.get("grid_cols", cols);
  c.grid_rows = rows;
  c.grid_cols = cols;
  r.get("num_keys", c.num_keys);
  r.get("radii", c.radii);
  r.get("amplitude", c.amplitude);
  r.get("key_seed", c.key_seed);
  r.get("trials", c.trials);
  r.get("seed_base", c.seed_base);
  std::vector<std::string> strategies;
  for (auto s : c.strategies) strategies.emplace_back(to_string(s));
  r.get("strategies", strategies);
  c.strategies.clear();
  for (const auto& s : strategies) c.strategies.push_back(parse_strategy(s));
  if (r.has("grad_free")) c.grad_free = solver_from_json(r.raw("grad_free"));
  if (r.has("grad_based")) c.grad_based = solver_from_json(r.raw("grad_based"));
  r.finish();
  return c;
}

json to_json(const HarnessConfig& c) {
  return {{"experiment", to_json(c.experiment)},
          {"theorems", to_json(c.theorems)},
          {"watermark", to_json(c.watermark)},
          {"watermark_output_path", c.watermark_output_path}};
}

HarnessConfig harness_from_json(const json& j) {
  ObjectReader r(j, "config");
  HarnessConfig c;
  if (r.has("experiment")) c.experiment = experiment_from_json(r.raw("experiment"));
  if (r.has("theorems")) c.theorems = theorems_from_json(r.raw("theorems"));
  if (r.has("watermark")) c.watermark = watermark_from_json(r.raw("watermark"));
  r.get("watermark_output_path", c.watermark_output_path);
  r.finish();
  return c;
}

HarnessConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    parse_error("config '" + path + "': " + e.what());
  }
  return harness_from_json(j);
}

}  // namespace fixinv
