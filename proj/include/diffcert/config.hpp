#pragma once

// Job configuration: JSON document -> resolved model, analysis options and
// simulation settings.  Every rejection names the offending JSON pointer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "diffcert/catalog.hpp"
#include "diffcert/error.hpp"
#include "diffcert/feller.hpp"
#include "diffcert/simulate.hpp"

namespace diffcert {

using json = nlohmann::json;

struct SimSettings {
  std::optional<double> x_init;
  std::optional<double> y_init;
  std::size_t n_paths = 10000;
  double dt = 1e-3;
  std::optional<double> t_max;  // simulate: 5; verify: 5 / certified delta
  std::optional<double> t_step;  // t_max / 20
  std::vector<double> t_grid;
  std::uint64_t seed = 1;
  Coupling coupling = Coupling::Synchronous;
  double guard_eps = std::numeric_limits<double>::quiet_NaN();
  std::size_t bootstrap = 200;
};

struct JobConfig {
  std::string model_name;  // catalog name or "inline"
  CatalogEntry model;
  AnalysisOptions analysis;
  SimSettings sim;
  std::optional<std::string> output;
  std::optional<std::string> csv_dir;
  std::optional<unsigned> threads;
};

namespace detail {

class ConfigReader {
 public:
  static void keys(const json& j, const std::string& ptr, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(ptr.empty() ? "/" : ptr, "expected an object");
    for (const auto& [k, v] : j.items()) {
      if (!allowed.count(k)) throw ConfigError(ptr + "/" + k, "unknown key");
    }
  }

  static double number(const json& j, const std::string& ptr) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
      const auto s = j.get<std::string>();
      if (s == "inf" || s == "+inf") return kInfinity;
      if (s == "-inf") return -kInfinity;
    }
    throw ConfigError(ptr, "expected a number");
  }

  static double finite_number(const json& j, const std::string& ptr) {
    const double v = number(j, ptr);
    if (!std::isfinite(v)) throw ConfigError(ptr, "expected a finite number");
    return v;
  }

  static double positive(const json& j, const std::string& ptr) {
    const double v = finite_number(j, ptr);
    if (!(v > 0.0)) throw ConfigError(ptr, "must be positive");
    return v;
  }

  static std::size_t count(const json& j, const std::string& ptr, std::size_t min = 1) {
    if (!j.is_number_integer() && !j.is_number_unsigned()) throw ConfigError(ptr, "expected an integer");
    const auto v = j.get<long long>();
    if (v < static_cast<long long>(min)) throw ConfigError(ptr, "must be at least " + std::to_string(min));
    return static_cast<std::size_t>(v);
  }

  static bool boolean(const json& j, const std::string& ptr) {
    if (!j.is_boolean()) throw ConfigError(ptr, "expected true or false");
    return j.get<bool>();
  }

  static std::string string(const json& j, const std::string& ptr) {
    if (!j.is_string()) throw ConfigError(ptr, "expected a string");
    return j.get<std::string>();
  }

  static Expr expression(const json& j, const std::string& ptr) {
    const auto s = string(j, ptr);
    try {
      return parse(s);
    } catch (const ParseError& e) {
      throw ConfigError(ptr, e.what());
    }
  }
};

inline Interval read_interval(const json& j, const std::string& ptr) {
  using R = ConfigReader;
  R::keys(j, ptr, {"lower", "upper", "lower_closed", "upper_closed"});
  Interval I;
  if (j.contains("lower")) I.lower = R::number(j["lower"], ptr + "/lower");
  if (j.contains("upper")) I.upper = R::number(j["upper"], ptr + "/upper");
  if (j.contains("lower_closed")) I.lower_closed = R::boolean(j["lower_closed"], ptr + "/lower_closed");
  if (j.contains("upper_closed")) I.upper_closed = R::boolean(j["upper_closed"], ptr + "/upper_closed");
  try {
    I.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(ptr, e.what());
  }
  return I;
}

inline void read_analysis(const json& j, const std::string& p, AnalysisOptions& o) {
  using R = ConfigReader;
  R::keys(j, p,
          {"rel_tol", "scan_rel_tol", "n_coarse", "probe_points", "tail_mass", "stabilization_tol",
           "boundary_fraction", "max_widenings", "unbounded_widenings", "unbounded_growth_ratio",
           "condition_c_lower_tol", "m_zero_tol", "k_cap", "sweep_points", "alpha_max_factor", "u_table_points",
           "enforce_hypotheses", "truncation", "divergence_threshold"});
  auto tol = [&](const char* k, double& dst) {
    if (!j.contains(k)) return;
    const double v = R::positive(j[k], p + "/" + k);
    if (!(v > 1e-15 && v < 0.1)) throw ConfigError(p + "/" + k, "tolerance must lie in (1e-15, 0.1)");
    dst = v;
  };
  tol("rel_tol", o.rel_tol);
  tol("scan_rel_tol", o.scan_rel_tol);
  tol("stabilization_tol", o.stabilization_tol);
  tol("condition_c_lower_tol", o.condition_c_lower_tol);
  tol("m_zero_tol", o.m_zero_tol);
  if (j.contains("tail_mass")) {
    o.tail_mass = R::positive(j["tail_mass"], p + "/tail_mass");
    if (o.tail_mass >= 0.5) throw ConfigError(p + "/tail_mass", "must be below 0.5");
  }
  if (j.contains("n_coarse")) o.n_coarse = R::count(j["n_coarse"], p + "/n_coarse", 8);
  if (j.contains("probe_points")) o.probe_points = R::count(j["probe_points"], p + "/probe_points", 8);
  if (j.contains("boundary_fraction")) {
    o.boundary_fraction = R::positive(j["boundary_fraction"], p + "/boundary_fraction");
    if (o.boundary_fraction >= 0.5) throw ConfigError(p + "/boundary_fraction", "must be below 0.5");
  }
  if (j.contains("max_widenings")) o.max_widenings = static_cast<int>(R::count(j["max_widenings"], p + "/max_widenings"));
  if (j.contains("unbounded_widenings")) {
    o.unbounded_widenings = static_cast<int>(R::count(j["unbounded_widenings"], p + "/unbounded_widenings"));
  }
  if (j.contains("unbounded_growth_ratio")) {
    o.unbounded_growth_ratio = R::positive(j["unbounded_growth_ratio"], p + "/unbounded_growth_ratio");
  }
  if (j.contains("k_cap")) o.k_cap = R::positive(j["k_cap"], p + "/k_cap");
  if (j.contains("sweep_points")) o.sweep_points = R::count(j["sweep_points"], p + "/sweep_points", 2);
  if (j.contains("alpha_max_factor")) o.alpha_max_factor = R::positive(j["alpha_max_factor"], p + "/alpha_max_factor");
  if (j.contains("u_table_points")) o.u_table_points = R::count(j["u_table_points"], p + "/u_table_points", 2);
  if (j.contains("enforce_hypotheses")) o.enforce_hypotheses = R::boolean(j["enforce_hypotheses"], p + "/enforce_hypotheses");
  if (j.contains("divergence_threshold")) {
    o.divergence.threshold = R::positive(j["divergence_threshold"], p + "/divergence_threshold");
  }
  if (j.contains("truncation")) {
    const auto& t = j["truncation"];
    if (!t.is_array() || t.size() != 2) throw ConfigError(p + "/truncation", "expected [lower, upper]");
    const double lo = R::number(t[0], p + "/truncation/0"), hi = R::number(t[1], p + "/truncation/1");
    if (!(lo < hi)) throw ConfigError(p + "/truncation", "needs lower < upper");
    o.truncation = std::make_pair(lo, hi);
  }
}

inline void read_simulation(const json& j, const std::string& p, SimSettings& s) {
  using R = ConfigReader;
  R::keys(j, p,
          {"x_init", "y_init", "n_paths", "dt", "t_max", "t_step", "t_grid", "seed", "coupling", "guard_eps",
           "bootstrap"});
  if (j.contains("x_init")) s.x_init = R::finite_number(j["x_init"], p + "/x_init");
  if (j.contains("y_init")) s.y_init = R::finite_number(j["y_init"], p + "/y_init");
  if (j.contains("n_paths")) s.n_paths = R::count(j["n_paths"], p + "/n_paths", 100);
  if (j.contains("dt")) s.dt = R::positive(j["dt"], p + "/dt");
  if (j.contains("t_max")) s.t_max = R::positive(j["t_max"], p + "/t_max");
  if (j.contains("t_step")) s.t_step = R::positive(j["t_step"], p + "/t_step");
  if (j.contains("t_grid")) {
    const auto& g = j["t_grid"];
    if (!g.is_array() || g.empty()) throw ConfigError(p + "/t_grid", "expected a non-empty array of times");
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::string q = p + "/t_grid/" + std::to_string(i);
      const double t = R::finite_number(g[i], q);
      if (t < 0.0) throw ConfigError(q, "times must be non-negative");
      if (!s.t_grid.empty() && !(t > s.t_grid.back())) throw ConfigError(q, "times must be strictly increasing");
      s.t_grid.push_back(t);
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0)) {
      throw ConfigError(p + "/seed", "expected a non-negative integer");
    }
    s.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("coupling")) {
    const auto c = R::string(j["coupling"], p + "/coupling");
    if (c == "synchronous") {
      s.coupling = Coupling::Synchronous;
    } else if (c == "independent") {
      s.coupling = Coupling::Independent;
    } else {
      throw ConfigError(p + "/coupling", "expected \"synchronous\" or \"independent\"");
    }
  }
  if (j.contains("guard_eps")) s.guard_eps = R::positive(j["guard_eps"], p + "/guard_eps");
  if (j.contains("bootstrap")) s.bootstrap = R::count(j["bootstrap"], p + "/bootstrap", 2);
}

}  // namespace detail

/// Validates and resolves a job document:
///   {"catalog": name, "params": {...}}  or  {"model": {interval, a, b, rho?, base_point?}}
///   plus optional "phi" (expression, or null to drop the entry's phi), "alpha",
///   "analysis", "simulation", "output", "csv_dir", "threads".
inline JobConfig parse_job_config(const json& j) {
  using R = detail::ConfigReader;
  R::keys(j, "", {"catalog", "params", "model", "phi", "alpha", "analysis", "simulation", "output", "csv_dir", "threads"});
  JobConfig cfg;
  const bool has_catalog = j.contains("catalog"), has_model = j.contains("model");
  if (has_catalog == has_model) throw ConfigError("/", "exactly one of \"catalog\" or \"model\" is required");

  if (has_catalog) {
    cfg.model_name = R::string(j["catalog"], "/catalog");
    const auto names = catalog_names();
    if (std::find(names.begin(), names.end(), cfg.model_name) == names.end()) {
      throw ConfigError("/catalog", "unknown catalog entry '" + cfg.model_name + "'");
    }
    CatalogParams params;
    if (j.contains("params")) {
      const auto allowed = catalog_parameters(cfg.model_name);
      R::keys(j["params"], "/params", std::set<std::string>(allowed.begin(), allowed.end()));
      for (const auto& [k, v] : j["params"].items()) params[k] = R::finite_number(v, "/params/" + k);
    }
    try {
      cfg.model = make_catalog_entry(cfg.model_name, params);
    } catch (const ParameterError& e) {
      throw ConfigError("/params", e.what());
    }
  } else {
    if (j.contains("params")) throw ConfigError("/params", "params only apply to catalog entries");
    const auto& m = j["model"];
    R::keys(m, "/model", {"interval", "a", "b", "rho", "base_point"});
    for (const char* k : {"interval", "a", "b"}) {
      if (!m.contains(k)) throw ConfigError(std::string("/model/") + k, "required");
    }
    cfg.model_name = "inline";
    cfg.model.name = "inline";
    cfg.model.spec.interval = detail::read_interval(m["interval"], "/model/interval");
    cfg.model.spec.a = R::expression(m["a"], "/model/a");
    cfg.model.spec.b = R::expression(m["b"], "/model/b");
    cfg.model.metric = MetricSpec(m.contains("rho") ? R::expression(m["rho"], "/model/rho") : Expr::variable());
    if (m.contains("base_point")) {
      const double c = R::finite_number(m["base_point"], "/model/base_point");
      if (!cfg.model.spec.interval.interior(c)) throw ConfigError("/model/base_point", "must lie inside the interval");
      cfg.model.spec.base_point = c;
    }
    const Interval& I = cfg.model.spec.interval;
    auto pick = [&](double preferred, double fallback) { return I.contains(preferred) ? preferred : fallback; };
    const double lo = I.lower_finite() ? I.lower : (I.upper_finite() ? I.upper - 2.0 : -1.0);
    const double hi = I.upper_finite() ? I.upper : lo + 2.0;
    cfg.model.x_init = pick(lo + 0.75 * (hi - lo), 0.5 * (lo + hi));
    cfg.model.y_init = pick(lo + 0.25 * (hi - lo), 0.5 * (lo + hi));
  }

  if (j.contains("phi")) {
    if (j["phi"].is_null()) {
      cfg.model.phi.reset();
    } else {
      cfg.model.phi = R::expression(j["phi"], "/phi");
    }
  }
  if (j.contains("alpha")) cfg.model.alpha = R::positive(j["alpha"], "/alpha");
  if (j.contains("analysis")) detail::read_analysis(j["analysis"], "/analysis", cfg.analysis);
  if (j.contains("simulation")) detail::read_simulation(j["simulation"], "/simulation", cfg.sim);
  if (j.contains("output")) cfg.output = R::string(j["output"], "/output");
  if (j.contains("csv_dir")) cfg.csv_dir = R::string(j["csv_dir"], "/csv_dir");
  if (j.contains("threads")) cfg.threads = static_cast<unsigned>(R::count(j["threads"], "/threads"));

  const Interval& I = cfg.model.spec.interval;
  const double x = cfg.sim.x_init.value_or(cfg.model.x_init), y = cfg.sim.y_init.value_or(cfg.model.y_init);
  if (!I.contains(x)) throw ConfigError("/simulation/x_init", "must lie in the state interval");
  if (!I.contains(y)) throw ConfigError("/simulation/y_init", "must lie in the state interval");
  if (x == y) throw ConfigError("/simulation/y_init", "must differ from x_init");
  return cfg;
}

/// Simulation config for a resolved job.  `default_t_max` applies when the
/// job names neither t_grid nor t_max.
inline SimConfig make_sim_config(const JobConfig& job, double default_t_max) {
  SimConfig s;
  s.spec = job.model.spec;
  s.x_init = job.sim.x_init.value_or(job.model.x_init);
  s.y_init = job.sim.y_init.value_or(job.model.y_init);
  s.n_paths = job.sim.n_paths;
  s.dt = job.sim.dt;
  s.seed = job.sim.seed;
  s.coupling = job.sim.coupling;
  s.guard_eps = job.sim.guard_eps;
  s.threads = job.threads.value_or(0);
  if (!job.sim.t_grid.empty()) {
    s.t_grid = job.sim.t_grid;
  } else {
    const double t_max = job.sim.t_max.value_or(default_t_max);
    s.t_grid = uniform_grid(t_max, job.sim.t_step.value_or(t_max / 20.0));
  }
  return s;
}

}  // namespace diffcert
