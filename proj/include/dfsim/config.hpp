#pragma once

// Scenario configuration: flat JSON in, validated ExperimentConfig out.
// Unknown keys are rejected by name; every range violation names its field.
// Serialization emits exactly the keys the scenario accepts, so
// load -> dump -> load is the identity.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dfsim/channels.hpp"
#include "dfsim/detection.hpp"
#include "dfsim/displaced.hpp"

namespace dfsim {

struct ExperimentConfig {
  std::string scenario;
  std::uint64_t seed = 1;
  double alpha = 1000.0;
  ImperfectionParams params{};
  long long shots = 0;  // scenario default applied at load
  Engine engine = Engine::asymptotic;
  std::string out_dir = "results";

  // fig2-sweep
  double theta_A = 0.0;
  int bin_count = 21;
  double bin_lo = -3.15;
  double bin_hi = 3.15;
  bool subtract_reference = true;

  // discrimination
  double window_center = 1.0 / std::sqrt(2.0);
  double window_half_width = 0.1;
  double threshold = 0.0;  // on diff; in intrinsic mode an offset from alpha^2
  bool intrinsic = false;

  // tomography / loss-sweep
  long long shots_per_pair = 20000;
  double residual_alpha = 10.0;
  int dim_per_mode = 3;
  long long max_iterations = 2000;
  double tolerance = 1e-9;
  bool filter = true;
  double loss_t = 1.0;
  std::string pipeline = "analytic";
  std::vector<double> t_grid;  // default 11-point grid applied at load
  bool split_se = true;
};

inline const std::set<std::string>& known_scenarios() {
  static const std::set<std::string> ids = {
      "fig2-sweep", "discrimination", "tomography", "loss-sweep", "engine-xval"};
  return ids;
}

inline std::set<std::string> allowed_keys(const std::string& scenario) {
  std::set<std::string> keys = {"scenario", "seed",        "alpha",
                                "alpha_squared", "eta",    "epsilon2",
                                "sigma_phi", "transmission", "shots",
                                "engine",   "out_dir"};
  if (scenario == "fig2-sweep") {
    keys.insert({"theta_A", "bin_count", "bin_lo", "bin_hi",
                 "subtract_reference"});
  } else if (scenario == "discrimination") {
    keys.insert({"window_center", "window_half_width", "threshold",
                 "intrinsic", "subtract_reference"});
  } else if (scenario == "tomography") {
    keys.insert({"shots_per_pair", "residual_alpha", "dim_per_mode",
                 "max_iterations", "tolerance", "filter", "loss_t",
                 "split_se"});
  } else if (scenario == "loss-sweep") {
    keys.insert({"pipeline", "t_grid", "shots_per_pair", "dim_per_mode",
                 "max_iterations", "tolerance", "filter"});
  } else if (scenario == "engine-xval") {
    // common keys only
  }
  return keys;
}

namespace detail {

inline double require_number(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number())
    throw std::invalid_argument("config field '" + key + "' must be a number");
  return v.get<double>();
}

inline long long require_integer(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer())
    throw std::invalid_argument("config field '" + key + "' must be an integer");
  return v.get<long long>();
}

inline bool require_bool(const nlohmann::json& v, const std::string& key) {
  if (!v.is_boolean())
    throw std::invalid_argument("config field '" + key + "' must be a boolean");
  return v.get<bool>();
}

inline std::string require_string(const nlohmann::json& v, const std::string& key) {
  if (!v.is_string())
    throw std::invalid_argument("config field '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object())
    throw std::invalid_argument("config must be a JSON object");
  if (!j.contains("scenario"))
    throw std::invalid_argument("config field 'scenario' is required");
  ExperimentConfig c;
  c.scenario = detail::require_string(j.at("scenario"), "scenario");
  if (known_scenarios().count(c.scenario) == 0)
    throw std::invalid_argument(
        "unknown scenario '" + c.scenario +
        "' (expected fig2-sweep, discrimination, tomography, loss-sweep or "
        "engine-xval)");
  const auto allowed = allowed_keys(c.scenario);
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (allowed.count(key) == 0)
      throw std::invalid_argument("unknown config key '" + key +
                                  "' for scenario " + c.scenario);
  }
  if (j.contains("alpha") && j.contains("alpha_squared"))
    throw std::invalid_argument(
        "config fields 'alpha' and 'alpha_squared' are mutually exclusive");

  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer())
      throw std::invalid_argument("config field 'seed' must be an integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("alpha")) c.alpha = detail::require_number(j.at("alpha"), "alpha");
  if (j.contains("alpha_squared")) {
    const double a2 = detail::require_number(j.at("alpha_squared"), "alpha_squared");
    if (!(a2 >= 0.0))
      throw std::invalid_argument("config field 'alpha_squared' must be >= 0");
    c.alpha = std::sqrt(a2);
  }
  if (j.contains("eta")) c.params.eta = detail::require_number(j.at("eta"), "eta");
  if (j.contains("epsilon2"))
    c.params.epsilon2 = detail::require_number(j.at("epsilon2"), "epsilon2");
  if (j.contains("sigma_phi"))
    c.params.sigma_phi = detail::require_number(j.at("sigma_phi"), "sigma_phi");
  if (j.contains("transmission"))
    c.params.transmission = detail::require_number(j.at("transmission"), "transmission");
  if (j.contains("engine"))
    c.engine = engine_from_string(detail::require_string(j.at("engine"), "engine"));
  if (j.contains("out_dir"))
    c.out_dir = detail::require_string(j.at("out_dir"), "out_dir");

  if (j.contains("theta_A")) c.theta_A = detail::require_number(j.at("theta_A"), "theta_A");
  if (j.contains("bin_count"))
    c.bin_count = static_cast<int>(detail::require_integer(j.at("bin_count"), "bin_count"));
  if (j.contains("bin_lo")) c.bin_lo = detail::require_number(j.at("bin_lo"), "bin_lo");
  if (j.contains("bin_hi")) c.bin_hi = detail::require_number(j.at("bin_hi"), "bin_hi");
  if (j.contains("subtract_reference"))
    c.subtract_reference = detail::require_bool(j.at("subtract_reference"), "subtract_reference");
  if (j.contains("window_center"))
    c.window_center = detail::require_number(j.at("window_center"), "window_center");
  if (j.contains("window_half_width"))
    c.window_half_width = detail::require_number(j.at("window_half_width"), "window_half_width");
  if (j.contains("threshold"))
    c.threshold = detail::require_number(j.at("threshold"), "threshold");
  if (j.contains("intrinsic"))
    c.intrinsic = detail::require_bool(j.at("intrinsic"), "intrinsic");
  if (j.contains("shots_per_pair"))
    c.shots_per_pair = detail::require_integer(j.at("shots_per_pair"), "shots_per_pair");
  if (j.contains("residual_alpha"))
    c.residual_alpha = detail::require_number(j.at("residual_alpha"), "residual_alpha");
  if (j.contains("dim_per_mode"))
    c.dim_per_mode = static_cast<int>(detail::require_integer(j.at("dim_per_mode"), "dim_per_mode"));
  if (j.contains("max_iterations"))
    c.max_iterations = detail::require_integer(j.at("max_iterations"), "max_iterations");
  if (j.contains("tolerance"))
    c.tolerance = detail::require_number(j.at("tolerance"), "tolerance");
  if (j.contains("filter")) c.filter = detail::require_bool(j.at("filter"), "filter");
  if (j.contains("loss_t")) c.loss_t = detail::require_number(j.at("loss_t"), "loss_t");
  if (j.contains("pipeline"))
    c.pipeline = detail::require_string(j.at("pipeline"), "pipeline");
  if (j.contains("split_se"))
    c.split_se = detail::require_bool(j.at("split_se"), "split_se");
  if (j.contains("t_grid")) {
    const auto& g = j.at("t_grid");
    if (!g.is_array() || g.empty())
      throw std::invalid_argument("config field 't_grid' must be a non-empty array");
    c.t_grid.clear();
    for (const auto& v : g) c.t_grid.push_back(detail::require_number(v, "t_grid"));
  }

  // Scenario defaults for fields the user left unset.
  if (!j.contains("alpha") && !j.contains("alpha_squared") &&
      c.scenario == "engine-xval")
    c.alpha = 6.0;
  if (!j.contains("shots")) {
    if (c.scenario == "fig2-sweep") c.shots = 1000000;
    else if (c.scenario == "discrimination") c.shots = 20000000;
    else if (c.scenario == "engine-xval") c.shots = 1000000;
    else c.shots = 1;  // tomography and loss-sweep count via shots_per_pair
  } else {
    c.shots = detail::require_integer(j.at("shots"), "shots");
  }
  if (c.t_grid.empty())
    for (int i = 0; i <= 10; ++i) c.t_grid.push_back(0.1 * i);

  // Range validation, each error naming its field.
  c.params.validate();
  if (!(c.alpha >= 0.0))
    throw std::invalid_argument("config field 'alpha' must be >= 0");
  if (c.shots < 1)
    throw std::invalid_argument("config field 'shots' must be >= 1");
  if (c.engine == Engine::exact && c.alpha > kExactEngineMaxAlpha)
    throw std::invalid_argument(
        "config: exact engine is infeasible at alpha > " +
        std::to_string(kExactEngineMaxAlpha) +
        " (alpha_squared this large needs engine = 'asymptotic')");
  if (c.scenario == "engine-xval" && c.alpha > kExactEngineMaxAlpha)
    throw std::invalid_argument(
        "config field 'alpha' must be <= " +
        std::to_string(kExactEngineMaxAlpha) +
        " for engine-xval (the exact reference pmf must be feasible)");
  if (c.bin_count < 1)
    throw std::invalid_argument("config field 'bin_count' must be >= 1");
  if (!(c.bin_hi > c.bin_lo))
    throw std::invalid_argument("config field 'bin_hi' must exceed bin_lo");
  if (!(c.window_half_width > 0.0))
    throw std::invalid_argument("config field 'window_half_width' must be > 0");
  if (c.shots_per_pair < 1)
    throw std::invalid_argument("config field 'shots_per_pair' must be >= 1");
  if (!(c.residual_alpha >= 0.0))
    throw std::invalid_argument("config field 'residual_alpha' must be >= 0");
  if (c.dim_per_mode < 2)
    throw std::invalid_argument("config field 'dim_per_mode' must be >= 2");
  if (c.max_iterations < 1)
    throw std::invalid_argument("config field 'max_iterations' must be >= 1");
  if (!(c.tolerance > 0.0))
    throw std::invalid_argument("config field 'tolerance' must be > 0");
  if (!(c.loss_t >= 0.0 && c.loss_t <= 1.0))
    throw std::invalid_argument("config field 'loss_t' must lie in [0,1]");
  if (c.pipeline != "analytic" && c.pipeline != "monte-carlo")
    throw std::invalid_argument(
        "config field 'pipeline' must be 'analytic' or 'monte-carlo'");
  for (double t : c.t_grid)
    if (!(t >= 0.0 && t <= 1.0))
      throw std::invalid_argument("config field 't_grid' entries must lie in [0,1]");
  return c;
}

inline ExperimentConfig load_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("config file not found: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_config_text(ss.str());
}

inline nlohmann::json dump_config(const ExperimentConfig& c) {
  nlohmann::json j;
  j["scenario"] = c.scenario;
  j["seed"] = c.seed;
  j["alpha"] = c.alpha;
  j["eta"] = c.params.eta;
  j["epsilon2"] = c.params.epsilon2;
  j["sigma_phi"] = c.params.sigma_phi;
  j["transmission"] = c.params.transmission;
  j["shots"] = c.shots;
  j["engine"] = c.engine == Engine::exact ? "exact" : "asymptotic";
  j["out_dir"] = c.out_dir;
  if (c.scenario == "fig2-sweep") {
    j["theta_A"] = c.theta_A;
    j["bin_count"] = c.bin_count;
    j["bin_lo"] = c.bin_lo;
    j["bin_hi"] = c.bin_hi;
    j["subtract_reference"] = c.subtract_reference;
  } else if (c.scenario == "discrimination") {
    j["window_center"] = c.window_center;
    j["window_half_width"] = c.window_half_width;
    j["threshold"] = c.threshold;
    j["intrinsic"] = c.intrinsic;
    j["subtract_reference"] = c.subtract_reference;
  } else if (c.scenario == "tomography") {
    j["shots_per_pair"] = c.shots_per_pair;
    j["residual_alpha"] = c.residual_alpha;
    j["dim_per_mode"] = c.dim_per_mode;
    j["max_iterations"] = c.max_iterations;
    j["tolerance"] = c.tolerance;
    j["filter"] = c.filter;
    j["loss_t"] = c.loss_t;
    j["split_se"] = c.split_se;
  } else if (c.scenario == "loss-sweep") {
    j["pipeline"] = c.pipeline;
    j["t_grid"] = c.t_grid;
    j["shots_per_pair"] = c.shots_per_pair;
    j["dim_per_mode"] = c.dim_per_mode;
    j["max_iterations"] = c.max_iterations;
    j["tolerance"] = c.tolerance;
    j["filter"] = c.filter;
  }
  return j;
}

}  // namespace dfsim
