// Acceptance suite: one PASS/FAIL line per criterion.  Exit status is 0 when
// every criterion was evaluated (use --strict to also require all PASS) and 1
// when an evaluation threw.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "diffcert/diffcert.hpp"
#include "properties.hpp"

using namespace diffcert;

namespace {

constexpr double kPi = std::numbers::pi;

// Tolerances and budgets.
constexpr double kOuCwTol = 1e-6;
constexpr double kOuUTol = 1e-6;
constexpr double kOuRuntime = 5.0;
constexpr double kJacobiTol = 1e-4;
constexpr double kJacobiRuntime = 10.0;
constexpr double kBranchingCwTol = 1e-3;
constexpr double kBranchingFlatTol = 1e-3;
constexpr double kBesselTol = 1e-6;
constexpr double kBesselAlpha = 0.25;
constexpr int kMinWidenings = 3;
constexpr std::size_t kPaths = 10000;
constexpr double kDt = 1e-3;
constexpr double kOuFitLo = 0.95, kOuFitHi = 1.05;
constexpr double kOuMcRuntime = 60.0;
constexpr double kBranchFitLo = 0.9, kBranchFitHi = 1.1;
constexpr double kResidualTol = 1e-3;
constexpr double kResidualStepOu = 1e-2, kResidualStepBessel = 1e-3;

struct Criterion {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [fail]");
    pass = pass && ok;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Criterion ou_constants() {
  const auto t0 = std::chrono::steady_clock::now();
  Criterion v;
  const CatalogEntry m = make_catalog_entry("ou");
  const Analysis an(m.spec, m.metric);
  v.check(std::fabs(an.cw().c_w - 1.0) <= kOuCwTol, "c_W = " + fmt("%.12f", an.cw().c_w));
  double worst = 0;
  for (int i = 0; i <= 100; ++i) worst = std::max(worst, std::fabs(an.scale_speed().u(-4.0 + 0.08 * i, 1e-9) - 1.0));
  v.check(worst <= kOuUTol, "max |u - 1| on 101 points in [-4, 4] = " + fmt("%.2e", worst));
  const Certificate c = an.certify();
  v.check(std::fabs(c.delta - 1.0) <= kOuCwTol && c.K == 1.0,
          "part (b) delta = " + fmt("%.12f", c.delta) + ", K = " + fmt("%g", c.K));
  const double t = seconds_since(t0);
  v.check(t < kOuRuntime, "runtime " + fmt("%.2f", t) + " s");
  return v;
}

Criterion jacobi_constants() {
  const auto t0 = std::chrono::steady_clock::now();
  Criterion v;
  const CatalogEntry m = make_catalog_entry("jacobi");
  const Analysis an(m.spec, m.metric);
  v.check(std::fabs(an.cw().c_w - kPi * kPi / 8) <= kJacobiTol, "c_W = " + fmt("%.10f", an.cw().c_w) + " vs pi^2/8");
  double worst = 0;
  for (double x : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const double as = std::asin(2 * x - 1);
    worst = std::max(worst, std::fabs(an.scale_speed().u_ratio(x, 1e-9) - (kPi * kPi / 8 - 0.5 * as * as)));
  }
  v.check(worst <= kJacobiTol, "max u/rho' error at 5 points = " + fmt("%.2e", worst));
  const double t = seconds_since(t0);
  v.check(t < kJacobiRuntime, "runtime " + fmt("%.2f", t) + " s");
  return v;
}

Criterion branching_constants() {
  Criterion v;
  const CatalogEntry m = make_catalog_entry("branching");
  const Analysis an(m.spec, m.metric);
  v.check(std::fabs(an.cw().c_w - 1.0) <= kBranchingCwTol, "c_W = " + fmt("%.6f", an.cw().c_w));
  double lo = 1e300, hi = -1e300;
  std::string values;
  for (double x : {0.5, 1.0, 2.0, 4.0}) {
    const double r = an.scale_speed().u_ratio(x, 1e-10);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    values += (values.empty() ? "" : ", ") + fmt("%.4f", r);
  }
  v.check(hi - lo <= kBranchingFlatTol,
          "u/rho' at x = 0.5, 1, 2, 4 is " + values + " (spread " + fmt("%.3f", hi - lo) + ")");
  return v;
}

Criterion bessel_constants() {
  Criterion v;
  for (double beta : {2.0, 3.0, 5.0}) {
    const CatalogEntry m = make_catalog_entry("bessel", {{"beta", beta}});
    const Analysis an(m.spec, m.metric);
    const Certificate c = an.certify(m.phi, kBesselAlpha);
    const double k = 2 * (beta + 1), a = kBesselAlpha;
    const double delta_ref = k / (a * k + 1), K_ref = 0.5 * (1 / (a * k) + 1);
    const std::string b = "beta " + fmt("%g", beta) + ": ";
    v.check(std::fabs(an.cw().c_w - 1 / k) <= kBesselTol, b + "c_W = " + fmt("%.9f", an.cw().c_w));
    v.check(std::fabs(c.delta - delta_ref) <= kBesselTol, b + "delta = " + fmt("%.9f", c.delta));
    v.check(std::fabs(c.K - K_ref) <= kBesselTol,
            b + "K = " + fmt("%.9f", c.K) + " vs closed form " + fmt("%.9f", K_ref));
  }
  return v;
}

Criterion power_threshold() {
  Criterion v;
  for (double r : {2.0, 3.0}) {
    const CatalogEntry m = make_catalog_entry("power-potential", {{"r", r}});
    const Analysis an(m.spec, m.metric);
    v.check(an.cw().status == CwStatus::Finite, "r = " + fmt("%g", r) + ": " + to_string(an.cw().status) +
                                                   " c_W = " + fmt("%.6f", an.cw().c_w));
  }
  const CatalogEntry m = make_catalog_entry("power-potential", {{"r", 1.5}});
  const Analysis an(m.spec, m.metric);
  const auto& h = an.cw().history;
  const int widenings = static_cast<int>(h.size()) - 1;
  bool growing = widenings >= kMinWidenings;
  for (std::size_t i = 1; growing && i < h.size(); ++i) growing = h[i].sup > h[i - 1].sup;
  v.check(an.cw().status == CwStatus::UnboundedSuspected && growing,
          std::string("r = 1.5: ") + to_string(an.cw().status) + " after " + std::to_string(widenings) +
              " widenings, sup rising monotonically to " + fmt("%.3f", an.cw().c_w));
  return v;
}

SimConfig catalog_sim(const std::string& name, double t_max) {
  const CatalogEntry m = make_catalog_entry(name);
  SimConfig cfg;
  cfg.spec = m.spec;
  cfg.x_init = m.x_init;
  cfg.y_init = m.y_init;
  cfg.n_paths = kPaths;
  cfg.dt = kDt;
  cfg.t_grid = uniform_grid(t_max, t_max / 20);
  cfg.threads = 1;
  return cfg;
}

Criterion ou_monte_carlo() {
  const auto t0 = std::chrono::steady_clock::now();
  Criterion v;
  const SimConfig cfg = catalog_sim("ou", 5.0);
  const auto rows = decay_rows(simulate_ensemble(cfg), [](double x) { return x; });
  const DecayFit f = fit_decay(rows);
  v.check(f.delta >= kOuFitLo && f.delta <= kOuFitHi, "fitted delta = " + fmt("%.4f", f.delta));
  const BoundReport b = verify_bound(rows, 1.0, 1.0, 1.0);
  v.check(b.bound_ok, "W1 <= e^-t within 3 s.e. at all " + std::to_string(rows.size()) + " times (worst margin " +
                          fmt("%.2e", b.worst_margin) + ")");
  const double t = seconds_since(t0);
  v.check(t < kOuMcRuntime, "runtime " + fmt("%.1f", t) + " s single-threaded");
  return v;
}

Criterion branching_monte_carlo() {
  Criterion v;
  const CatalogEntry m = make_catalog_entry("branching");
  const Analysis an(m.spec, m.metric);
  const Certificate cert = an.certify();
  const SimConfig cfg = catalog_sim("branching", 5.0 / cert.delta);
  const Ensemble ens = simulate_ensemble(cfg);
  const auto rho_rows = decay_rows(ens, m.metric);
  const DecayFit f = fit_decay(rho_rows);
  v.check(f.delta >= kBranchFitLo && f.delta <= kBranchFitHi, "fitted delta under sqrt(2x) = " + fmt("%.4f", f.delta));
  const TildeMetric tilde = tilde_metric(an);
  const auto tilde_rows = decay_rows(ens, tilde);
  const BoundReport b = verify_bound(tilde_rows, cert.delta, cert.K, std::fabs(tilde(cfg.x_init) - tilde(cfg.y_init)));
  v.check(b.bound_ok, "part (b) bound (delta " + fmt("%.4f", cert.delta) + ", K 1) under rho_tilde, worst margin " +
                          fmt("%.2e", b.worst_margin));
  return v;
}

Criterion property_suites() {
  Criterion v;
  auto add = [&](const char* name, const proptest::Outcome& o) {
    v.check(o.ok, std::string(name) + " (" + std::to_string(o.checked) + ")" + (o.ok ? "" : ": " + o.detail));
  };
  add("quadrature linearity/additivity", proptest::quadrature_linearity());
  add("derivative vs finite differences", proptest::derivative_fd_agreement());
  add("W1 vs permutations n <= 8", proptest::w1_permutation_equivalence());
  add("simulator determinism", proptest::simulator_determinism());
  add("c_W affine invariance", proptest::metric_affine_invariance());
  add("part (a) delta <= 1/c_W", proptest::part_a_below_inverse_cw());
  return v;
}

Criterion weak_residual() {
  Criterion v;
  struct Case {
    const char* name;
    double lo, hi, h;
  };
  for (const Case c : {Case{"ou", -4.0, 4.0, kResidualStepOu}, Case{"bessel", 0.05, 0.95, kResidualStepBessel}}) {
    const CatalogEntry m = make_catalog_entry(c.name);
    const Analysis an(m.spec, m.metric);
    double worst = 0;
    for (int i = 0; i <= 40; ++i) worst = std::max(worst, proptest::weak_residual(an, c.lo + (c.hi - c.lo) * i / 40, c.h));
    v.check(worst <= kResidualTol, std::string(c.name) + " max relative residual " + fmt("%.2e", worst));
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const bool strict = argc > 1 && std::strcmp(argv[1], "--strict") == 0;
  set_default_threads(1);
  const std::vector<std::pair<const char*, std::function<Criterion()>>> criteria{
      {"OU constants", ou_constants},
      {"Jacobi constants", jacobi_constants},
      {"branching constants", branching_constants},
      {"reflected Bessel constants", bessel_constants},
      {"power potential threshold", power_threshold},
      {"OU Monte Carlo decay", ou_monte_carlo},
      {"branching Monte Carlo decay", branching_monte_carlo},
      {"property suites", property_suites},
      {"weak-solution residual", weak_residual},
  };
  int passed = 0, errors = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Criterion v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
      ++errors;
    }
    passed += v.pass;
    std::printf("criterion %zu %s: %s | %s | %.2f s\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first,
                v.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria pass\n", passed, criteria.size());
  if (errors) return 1;
  return strict && passed != static_cast<int>(criteria.size()) ? 1 : 0;
}
