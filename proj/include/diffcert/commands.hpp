#pragma once

// The four jobs behind the command-line tool.  Each returns the JSON report,
// the CSV sidecar tables and the exit code (0 ok, 2 no certificate or bound
// violated, 1 error).

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "diffcert/catalog.hpp"
#include "diffcert/certificate.hpp"
#include "diffcert/config.hpp"
#include "diffcert/error.hpp"
#include "diffcert/feller.hpp"
#include "diffcert/simulate.hpp"

namespace diffcert {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitNoCertificate = 2 };

struct CsvTable {
  std::string file;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct CommandResult {
  json report;
  int exit_code = kExitOk;
  std::vector<CsvTable> tables;
};

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_text(const CsvTable& t) {
  auto line = [](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) s += ',';
      s += cells[i];
    }
    return s + '\n';
  };
  std::string out = line(t.header);
  for (const auto& r : t.rows) out += line(r);
  return out;
}

namespace detail {

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json interval_json(const Interval& I) {
  return {{"lower", finite_or_null(I.lower)},
          {"upper", finite_or_null(I.upper)},
          {"lower_closed", I.lower_closed},
          {"upper_closed", I.upper_closed}};
}

inline json model_json(const JobConfig& job) {
  const auto& m = job.model;
  json params = json::object();
  for (const auto& [k, v] : m.params) params[k] = v;
  return {{"name", job.model_name},
          {"params", params},
          {"interval", interval_json(m.spec.interval)},
          {"a", m.spec.a.str()},
          {"b", m.spec.b.str()},
          {"rho", m.metric.rho().str()},
          {"phi", m.phi ? json(m.phi->str()) : json(nullptr)}};
}

inline json endpoint_json(const EndpointCheck& e) {
  return {{"endpoint", e.endpoint},
          {"verdict", to_string(e.verdict)},
          {"cutoffs", e.divergence.trace.size()},
          {"message", e.message}};
}

inline json hypotheses_json(const HypothesisReport& h) {
  json h2 = json::array(), h4 = json::array();
  for (const auto& e : h.h2) h2.push_back(endpoint_json(e));
  for (const auto& e : h.h4) h4.push_back(endpoint_json(e));
  return {{"H1", {{"verdict", to_string(h.h1)}, {"probes", h.h1_probes}, {"message", h.h1_message}}},
          {"H2", h2},
          {"H3", {{"verdict", to_string(h.h3)}, {"m_total", finite_or_null(h.m_total)}}},
          {"H4", h4},
          {"rho_in_L2", {{"verdict", to_string(h.rho_in_L2)}, {"second_moment", finite_or_null(h.rho_second_moment)}}},
          {"all_pass", h.all_pass()}};
}

inline void hypothesis_warnings(const HypothesisReport& h, json& warnings) {
  auto note = [&](const char* tag, const std::vector<EndpointCheck>& v) {
    for (const auto& e : v) {
      if (e.verdict == Verdict::Fail) {
        warnings.push_back(std::string(tag) + " fails at the " + e.endpoint + " endpoint: " + e.message);
      }
    }
  };
  if (h.h1 == Verdict::Fail) warnings.push_back("H1 fails: " + h.h1_message);
  note("H2", h.h2);
  if (h.h3 == Verdict::Fail) warnings.push_back("H3 fails: " + h.message);
  note("H4", h.h4);
  if (h.rho_in_L2 == Verdict::Fail) warnings.push_back("rho is not square integrable under mu");
}

inline json cw_json(const CwResult& cw) {
  return {{"value", finite_or_null(cw.c_w)},
          {"argmax", finite_or_null(cw.arg)},
          {"status", to_string(cw.status)},
          {"boundary_flag", cw.boundary_flag},
          {"scan_domain", {cw.domain.first, cw.domain.second}},
          {"widenings", cw.history.empty() ? 0 : cw.history.size() - 1},
          {"note", cw.note}};
}

inline json condition_json(const ConditionC& c) {
  return {{"C", finite_or_null(c.C)},
          {"inf_phi_over_rho_prime", finite_or_null(c.inf_ratio)},
          {"M", c.M},
          {"M_raw", finite_or_null(c.M_raw)},
          {"lower_ok", c.lower_ok},
          {"flux_derivative", c.flux_derivative.str()}};
}

inline json cert_json(const Certificate& c) {
  json j = {{"mode", to_string(c.mode)},
            {"metric", c.metric},
            {"delta", c.delta},
            {"K", c.K},
            {"alpha", finite_or_null(c.alpha)},
            {"note", c.note}};
  if (c.condition_C) j["condition_C"] = condition_json(*c.condition_C);
  return j;
}

inline double lookup_computed(const std::string& name, const Analysis& an, const json& certs) {
  if (name == "c_w") return an.cw().c_w;
  if (name == "m_total") return an.scale_speed().m_total();
  if (name == "mean_rho") return an.scale_speed().mean_rho();
  const auto dot = name.find('.');
  if (dot == std::string::npos) return std::nan("");
  const std::string part = name.substr(0, dot), field = name.substr(dot + 1);
  if (!certs.contains(part) || !certs[part].contains(field) || !certs[part][field].is_number()) return std::nan("");
  return certs[part][field].get<double>();
}

inline json expected_json(const CatalogEntry& m, const Analysis& an, const json& certs) {
  json out = json::array();
  for (const auto& e : m.expected) {
    const double got = lookup_computed(e.name, an, certs);
    out.push_back({{"name", e.name},
                   {"expected", e.value},
                   {"tolerance", e.tolerance},
                   {"basis", e.basis},
                   {"computed", finite_or_null(got)},
                   {"ok", std::isfinite(got) && std::fabs(got - e.value) <= e.tolerance}});
  }
  return out;
}

inline json envelope(const char* command, const JobConfig& job) {
  return {{"command", command}, {"version", kVersion}, {"model", model_json(job)}, {"warnings", json::array()}};
}

inline CsvTable u_table_csv(const std::vector<UTableRow>& rows) {
  CsvTable t{"u_table.csv", {"x", "u", "u_over_rho_prime"}, {}};
  for (const auto& r : rows) t.rows.push_back({csv_number(r.x), csv_number(r.u), csv_number(r.u_over_rho_prime)});
  return t;
}

inline CsvTable decay_csv(const std::string& file, const std::vector<DecayRow>& rows) {
  CsvTable t{file, {"t", "w1", "std_err"}, {}};
  for (const auto& r : rows) t.rows.push_back({csv_number(r.t), csv_number(r.w1), csv_number(r.std_err)});
  return t;
}

inline json rows_json(const std::vector<DecayRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"t", r.t}, {"w1", r.w1}, {"std_err", r.std_err}, {"coupling_distance", r.coupling}});
  }
  return out;
}

inline json fit_json(const std::vector<DecayRow>& rows) {
  try {
    const DecayFit f = fit_decay(rows);
    return {{"fitted_delta", f.delta}, {"fitted_logK", f.log_k}, {"rows_used", f.rows_used}, {"error", nullptr}};
  } catch (const FitError& e) {
    return {{"fitted_delta", nullptr}, {"fitted_logK", nullptr}, {"rows_used", 0}, {"error", e.what()}};
  }
}

inline json sim_json(const SimConfig& s, std::size_t bootstrap) {
  return {{"x_init", s.x_init},  {"y_init", s.y_init}, {"n_paths", s.n_paths},         {"dt", s.dt},
          {"seed", s.seed},      {"coupling", to_string(s.coupling)}, {"t_grid", s.t_grid}, {"bootstrap", bootstrap}};
}

inline json guard_json(const Ensemble& e) {
  return {{"hits", e.guard_hits}, {"steps", e.steps}, {"rate", e.guard_rate()}};
}

inline AnalysisOptions options_for(const JobConfig& job) { return job.analysis; }

struct AnalysisOutcome {
  std::optional<Analysis> analysis;
  std::optional<Certificate> part_b;
  std::optional<Certificate> part_a;
  std::string no_certificate;
};

inline AnalysisOutcome run_analysis(const JobConfig& job, json& report, std::vector<CsvTable>& tables) {
  AnalysisOutcome out;
  out.analysis.emplace(job.model.spec, job.model.metric, options_for(job));
  const Analysis& an = *out.analysis;
  const ScaleSpeed& ss = an.scale_speed();
  report["hypotheses"] = hypotheses_json(an.hypotheses());
  hypothesis_warnings(an.hypotheses(), report["warnings"]);
  report["scale_speed"] = {{"base_point", ss.base_point()},
                           {"m_total", ss.m_total()},
                           {"mean_rho", ss.mean_rho()},
                           {"xi0", ss.xi0()}};
  report["c_w"] = cw_json(an.cw());
  const auto table = an.u_table();
  json ut = json::array();
  for (const auto& r : table) ut.push_back({{"x", r.x}, {"u", r.u}, {"u_over_rho_prime", r.u_over_rho_prime}});
  report["u_table"] = ut;
  tables.push_back(u_table_csv(table));

  json certs = json::object();
  if (an.cw().status != CwStatus::Finite) {
    out.no_certificate = "c_W unbounded suspected: sup u/rho' still growing at x = " + std::to_string(an.cw().arg);
    report["certificates"] = nullptr;
    report["spectral_gap_lower"] = nullptr;
    report["no_certificate"] = out.no_certificate;
    report["expected"] = expected_json(job.model, an, certs);
    return out;
  }
  out.part_b = an.certify();
  certs["part_b"] = cert_json(*out.part_b);
  if (job.model.phi) {
    try {
      out.part_a = an.certify(job.model.phi, job.model.alpha);
      certs["part_a"] = cert_json(*out.part_a);
    } catch (const NoCertificateError& e) {
      certs["part_a"] = {{"mode", "part_a"}, {"error", e.what()}};
      report["warnings"].push_back(std::string("part (a) not certified: ") + e.what());
    }
  }
  report["certificates"] = certs;
  report["spectral_gap_lower"] = out.part_b->spectral_gap_lower;
  report["no_certificate"] = nullptr;
  report["expected"] = expected_json(job.model, an, certs);
  return out;
}

}  // namespace detail

inline CommandResult cmd_analyze(const JobConfig& job) {
  CommandResult res;
  res.report = detail::envelope("analyze", job);
  const auto out = detail::run_analysis(job, res.report, res.tables);
  res.exit_code = out.no_certificate.empty() ? kExitOk : kExitNoCertificate;
  return res;
}

inline CommandResult cmd_simulate(const JobConfig& job) {
  CommandResult res;
  res.report = detail::envelope("simulate", job);
  const SimConfig cfg = make_sim_config(job, 5.0);
  const Ensemble ens = simulate_ensemble(cfg);
  for (const auto& w : ens.warnings) res.report["warnings"].push_back(w);
  const auto rows = decay_rows(ens, job.model.metric, job.sim.bootstrap, job.sim.seed);
  res.report["simulation"] = detail::sim_json(cfg, job.sim.bootstrap);
  res.report["guard"] = detail::guard_json(ens);
  res.report["metric"] = "rho";
  res.report["rows"] = detail::rows_json(rows);
  const json fit = detail::fit_json(rows);
  for (const auto& [k, v] : fit.items()) res.report[k] = v;
  res.tables.push_back(detail::decay_csv("decay.csv", rows));
  res.exit_code = fit["error"].is_null() ? kExitOk : kExitError;
  return res;
}

inline CommandResult cmd_verify(const JobConfig& job) {
  CommandResult res;
  res.report = detail::envelope("verify", job);
  auto out = detail::run_analysis(job, res.report, res.tables);
  if (!out.no_certificate.empty()) {
    res.report["checks"] = json::array();
    res.report["bound_ok"] = false;
    res.exit_code = kExitNoCertificate;
    return res;
  }
  const Analysis& an = *out.analysis;
  const SimConfig cfg = make_sim_config(job, 5.0 / out.part_b->delta);
  const Ensemble ens = simulate_ensemble(cfg);
  for (const auto& w : ens.warnings) res.report["warnings"].push_back(w);
  res.report["simulation"] = detail::sim_json(cfg, job.sim.bootstrap);
  res.report["guard"] = detail::guard_json(ens);

  json checks = json::array();
  bool all_ok = true;
  auto check = [&](const Certificate& cert, const std::vector<DecayRow>& rows, double d0, const char* csv) {
    const BoundReport b = verify_bound(rows, cert.delta, cert.K, d0);
    json c = {{"certificate", to_string(cert.mode)},
              {"metric", cert.metric},
              {"delta", cert.delta},
              {"K", cert.K},
              {"d0", d0},
              {"bound_ok", b.bound_ok},
              {"violations", b.violations},
              {"worst_margin", detail::finite_or_null(b.worst_margin)},
              {"rows", detail::rows_json(rows)}};
    const json fit = detail::fit_json(rows);
    for (const auto& [k, v] : fit.items()) c[k] = v;
    checks.push_back(c);
    all_ok = all_ok && b.bound_ok;
    res.tables.push_back(detail::decay_csv(csv, rows));
  };

  const TildeMetric tilde = tilde_metric(an);
  check(*out.part_b, decay_rows(ens, tilde, job.sim.bootstrap, job.sim.seed),
        std::fabs(tilde(cfg.x_init) - tilde(cfg.y_init)), "decay.csv");
  if (out.part_a) {
    const MetricSpec& rho = job.model.metric;
    check(*out.part_a, decay_rows(ens, rho, job.sim.bootstrap, job.sim.seed),
          std::fabs(rho(cfg.x_init) - rho(cfg.y_init)), "decay_part_a.csv");
  }
  res.report["checks"] = checks;
  res.report["bound_ok"] = all_ok;
  res.exit_code = all_ok ? kExitOk : kExitNoCertificate;
  return res;
}

inline CommandResult cmd_sweep(const JobConfig& job) {
  if (!job.model.phi) throw ConfigError("/phi", "sweep needs a test function phi");
  CommandResult res;
  res.report = detail::envelope("sweep", job);
  const Analysis an(job.model.spec, job.model.metric, detail::options_for(job));
  res.report["c_w"] = detail::cw_json(an.cw());
  if (an.cw().status != CwStatus::Finite) {
    res.report["rows"] = json::array();
    res.report["no_certificate"] = "c_W unbounded suspected";
    res.exit_code = kExitNoCertificate;
    return res;
  }
  std::vector<SweepRow> rows;
  try {
    rows = an.alpha_sweep(*job.model.phi);
  } catch (const NoCertificateError& e) {
    res.report["rows"] = json::array();
    res.report["no_certificate"] = e.what();
    res.exit_code = kExitNoCertificate;
    return res;
  }
  const double limit = 1.0 / an.cw().c_w;
  CsvTable t{"sweep.csv", {"alpha", "delta", "K", "note"}, {}};
  t.rows.push_back({"0", csv_number(limit), "inf", "1/c_W"});
  json jr = json::array();
  for (const auto& r : rows) {
    t.rows.push_back({csv_number(r.alpha), csv_number(r.delta), csv_number(r.K), ""});
    jr.push_back({{"alpha", r.alpha}, {"delta", r.delta}, {"K", r.K}});
  }
  res.report["limit"] = {{"label", "1/c_W"}, {"delta", limit}};
  res.report["condition_C"] = detail::condition_json(an.condition_C(*job.model.phi));
  res.report["rows"] = jr;
  res.report["no_certificate"] = nullptr;
  res.tables.push_back(std::move(t));
  return res;
}

}  // namespace diffcert
