#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "diffcert/diffcert.hpp"

namespace {

using diffcert::json;

struct Flags {
  std::string config;
  std::string catalog;
  std::vector<std::string> params;
  std::string phi;
  double alpha = 0, x = 0, y = 0, dt = 0, t_max = 0, t_step = 0, guard_eps = 0;
  std::size_t paths = 0, bootstrap = 0;
  std::uint64_t seed = 0;
  std::string coupling;
  std::string csv;
  std::string output;
  unsigned threads = 0;
  bool strict = false;
};

struct Opts {
  CLI::Option *config, *catalog, *phi, *alpha, *x, *y, *paths, *seed, *dt, *t_max, *t_step, *coupling, *guard_eps,
      *bootstrap, *csv, *output, *threads;
};

Opts add_flags(CLI::App* app, Flags& f) {
  Opts o{};
  o.config = app->add_option("--config", f.config, "JSON job file")->check(CLI::ExistingFile);
  o.catalog = app->add_option("--catalog", f.catalog, "catalog model name");
  app->add_option("--param", f.params, "catalog parameter as name=value (repeatable)");
  o.phi = app->add_option("--phi", f.phi, "test function phi(x) for part (a), or 'none'");
  o.alpha = app->add_option("--alpha", f.alpha, "part (a) parameter alpha");
  o.x = app->add_option("--x", f.x, "initial point of the first copy");
  o.y = app->add_option("--y", f.y, "initial point of the second copy");
  o.paths = app->add_option("--paths", f.paths, "number of Monte Carlo paths");
  o.seed = app->add_option("--seed", f.seed, "Philox seed");
  o.dt = app->add_option("--dt", f.dt, "Euler-Maruyama step");
  o.t_max = app->add_option("--t-max", f.t_max, "last output time");
  o.t_step = app->add_option("--t-step", f.t_step, "spacing of output times");
  o.coupling = app->add_option("--coupling", f.coupling, "synchronous or independent");
  o.guard_eps = app->add_option("--guard-eps", f.guard_eps, "clamping distance at open endpoints");
  o.bootstrap = app->add_option("--bootstrap", f.bootstrap, "bootstrap resamples for W1 standard errors");
  o.csv = app->add_option("--csv", f.csv, "directory for CSV tables");
  o.output = app->add_option("--output", f.output, "write the JSON report here instead of stdout");
  o.threads = app->add_option("--threads", f.threads, "worker threads (default $DIFFCERT_THREADS or 1)");
  app->add_flag("--strict-hypotheses", f.strict, "refuse to certify when a hypothesis check fails");
  return o;
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw diffcert::ConfigError("", "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw diffcert::ConfigError("", "'" + path + "' is not valid JSON: " + e.what());
  }
}

// Command-line flags are applied as a patch over the config file, after which
// the merged document is validated as a whole.
json merged_job(const Flags& f, const Opts& o) {
  json j = o.config->count() ? load_config(f.config) : json::object();
  if (!j.is_object()) throw diffcert::ConfigError("", "job file must hold a JSON object");
  if (o.catalog->count()) {
    j.erase("model");
    j["catalog"] = f.catalog;
  }
  for (const auto& kv : f.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw diffcert::ConfigError("/params", "expected name=value, got '" + kv + "'");
    const std::string name = kv.substr(0, eq), value = kv.substr(eq + 1);
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || *end != '\0') throw diffcert::ConfigError("/params/" + name, "'" + value + "' is not a number");
    j["params"][name] = v;
  }
  if (o.phi->count()) j["phi"] = f.phi == "none" ? json(nullptr) : json(f.phi);
  if (o.alpha->count()) j["alpha"] = f.alpha;
  auto sim = [&](CLI::Option* opt, const char* key, const json& v) {
    if (opt->count()) j["simulation"][key] = v;
  };
  sim(o.x, "x_init", f.x);
  sim(o.y, "y_init", f.y);
  sim(o.paths, "n_paths", f.paths);
  sim(o.seed, "seed", f.seed);
  sim(o.dt, "dt", f.dt);
  sim(o.t_max, "t_max", f.t_max);
  sim(o.t_step, "t_step", f.t_step);
  sim(o.coupling, "coupling", f.coupling);
  sim(o.guard_eps, "guard_eps", f.guard_eps);
  sim(o.bootstrap, "bootstrap", f.bootstrap);
  if (o.csv->count()) j["csv_dir"] = f.csv;
  if (o.output->count()) j["output"] = f.output;
  if (o.threads->count()) j["threads"] = f.threads;
  if (f.strict) j["analysis"]["enforce_hypotheses"] = true;
  return j;
}

void write_outputs(const diffcert::JobConfig& job, const diffcert::CommandResult& res) {
  const std::string text = res.report.dump(2) + "\n";
  if (job.output) {
    std::ofstream out(*job.output);
    if (!out) throw diffcert::ConfigError("/output", "cannot write '" + *job.output + "'");
    out << text;
  } else {
    std::cout << text;
  }
  if (job.csv_dir) {
    std::filesystem::create_directories(*job.csv_dir);
    for (const auto& t : res.tables) {
      std::ofstream out(std::filesystem::path(*job.csv_dir) / t.file);
      if (!out) throw diffcert::ConfigError("/csv_dir", "cannot write into '" + *job.csv_dir + "'");
      out << diffcert::csv_text(t);
    }
  }
}

json catalog_listing() {
  json out = json::array();
  for (const auto& name : diffcert::catalog_names()) {
    const auto e = diffcert::make_catalog_entry(name);
    json params = json::object();
    for (const auto& [k, v] : e.params) params[k] = v;
    out.push_back({{"name", name}, {"description", e.description}, {"params", params}});
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein contraction certificates for one-dimensional diffusions"};
  app.set_version_flag("--version", diffcert::kVersion);
  app.require_subcommand(1);

  Flags flags;
  struct Sub {
    CLI::App* app;
    Opts opts;
    diffcert::CommandResult (*run)(const diffcert::JobConfig&);
  };
  std::vector<Sub> subs;
  auto add = [&](const char* name, const char* help, diffcert::CommandResult (*run)(const diffcert::JobConfig&)) {
    CLI::App* sub = app.add_subcommand(name, help);
    subs.push_back({sub, add_flags(sub, flags), run});
  };
  add("analyze", "check hypotheses, compute c_W, u and the certificates", diffcert::cmd_analyze);
  add("simulate", "run coupled Euler-Maruyama paths and estimate W1 over time", diffcert::cmd_simulate);
  add("verify", "compare the simulated W1 decay with the certified bounds", diffcert::cmd_verify);
  add("sweep", "tabulate (alpha, delta, K) for part (a)", diffcert::cmd_sweep);
  CLI::App* list = app.add_subcommand("catalog", "list the built-in models");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : diffcert::kExitError;
  }

  if (list->parsed()) {
    std::cout << catalog_listing().dump(2) << "\n";
    return diffcert::kExitOk;
  }

  for (const auto& s : subs) {
    if (!s.app->parsed()) continue;
    try {
      const diffcert::JobConfig job = diffcert::parse_job_config(merged_job(flags, s.opts));
      if (job.threads) diffcert::set_default_threads(*job.threads);
      const diffcert::CommandResult res = s.run(job);
      write_outputs(job, res);
      return res.exit_code;
    } catch (const diffcert::ConfigError& e) {
      std::cerr << "diffcert: config error at '" << e.pointer() << "': " << e.what() << "\n";
      return diffcert::kExitError;
    } catch (const diffcert::NoCertificateError& e) {
      std::cerr << "diffcert: no certificate: " << e.what() << "\n";
      return diffcert::kExitNoCertificate;
    } catch (const std::exception& e) {
      std::cerr << "diffcert: " << e.what() << "\n";
      return diffcert::kExitError;
    }
  }
  return diffcert::kExitError;
}
