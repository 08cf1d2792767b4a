#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "diffcert/bridge.hpp"
#include "diffcert/error.hpp"
#include "diffcert/expr.hpp"
#include "diffcert/feller.hpp"
#include "diffcert/optimize.hpp"

namespace diffcert {

struct ExpectedConstant {
  std::string name;
  double value;
  double tolerance;
  std::string basis;  // how the value follows in closed form
};

struct CatalogEntry {
  std::string name;
  std::string description;
  std::map<std::string, double> params;
  DiffusionSpec spec;
  MetricSpec metric;
  std::optional<Expr> phi;
  std::optional<double> alpha;
  double x_init = 1.0;
  double y_init = 0.0;
  std::string cw_status = "finite";
  std::vector<ExpectedConstant> expected;
};

using CatalogParams = std::map<std::string, double>;

inline std::vector<std::string> catalog_names() {
  return {"ou", "sinusoidal-drift", "sinusoidal-potential", "power-potential", "jacobi", "branching", "bessel"};
}

/// Parameter names accepted by a catalog entry.
inline std::vector<std::string> catalog_parameters(const std::string& name) {
  if (name == "sinusoidal-potential") return {"n", "L"};
  if (name == "power-potential") return {"C1", "r", "kappa"};
  if (name == "bessel") return {"beta"};
  return {};
}

namespace detail {

inline std::string num(double v) { return "(" + format_number(v) + ")"; }

inline CatalogParams merge_params(const std::string& entry, CatalogParams defaults, const CatalogParams& given) {
  for (const auto& [k, v] : given) {
    auto it = defaults.find(k);
    if (it == defaults.end()) throw ParameterError("catalog entry '" + entry + "' has no parameter '" + k + "'");
    if (!std::isfinite(v)) throw ParameterError("parameter '" + k + "' must be finite");
    it->second = v;
  }
  return defaults;
}

inline Interval real_line() { return {}; }

// phi for the sinusoidal potential: 1/(n+1 + sin|x|) off [-L, L], a quintic
// bridge inside, scaled so that phi >= 1 = rho'.
inline Expr sinusoidal_potential_phi(double n, double L) {
  const Expr right = parse("1/(" + detail::format_number(n + 1) + "+sin(x))");
  const Expr left = parse("1/(" + detail::format_number(n + 1) + "-sin(x))");
  const Expr mid = hermite_bridge(-L, L, jet_of(left, -L), jet_of(right, L));
  const Expr raw = piecewise3(left, -L, mid, L, right);
  const double tail_min = 1.0 / (n + 2.0);
  const double bridge_min = -supremum([&](double x) { return -mid(x); }, -L, L, 2048).value;
  const double lo = std::min(tail_min, bridge_min);
  if (!(lo > 0.0)) throw ParameterError("bridge for phi is not positive; choose a larger L");
  return Expr::constant((1.0 + 1e-10) / lo) * raw;
}

}  // namespace detail

/// Builds a catalog entry by name; unknown names or parameters throw ParameterError.
inline CatalogEntry make_catalog_entry(const std::string& name, const CatalogParams& given = {}) {
  using detail::num;
  CatalogEntry e;
  e.name = name;
  constexpr double pi = std::numbers::pi;
  if (name == "ou") {
    e.params = detail::merge_params(name, {}, given);
    e.description = "Ornstein-Uhlenbeck: a = 1, b = -x on R";
    e.spec = {detail::real_line(), parse("1"), parse("-x"), {}};
    e.metric = MetricSpec(parse("x"));
    e.phi = parse("1");
    e.x_init = 1.0;
    e.y_init = 0.0;
    e.expected = {{"c_w", 1.0, 1e-6, "u = 1 solves u' - x u = -x"},
                  {"part_b.delta", 1.0, 1e-6, "1 / c_w"},
                  {"m_total", std::sqrt(2 * pi), 1e-8, "integral of exp(-x^2/2)"}};
  } else if (name == "sinusoidal-drift") {
    e.params = detail::merge_params(name, {}, given);
    e.description = "a = 1, b = -x(2 + sin x) on R; curvature unbounded below";
    e.spec = {detail::real_line(), parse("1"), parse("-x*(2+sin(x))"), {}};
    e.metric = MetricSpec(parse("x"));
    e.x_init = 1.0;
    e.y_init = -1.0;
  } else if (name == "sinusoidal-potential") {
    e.params = detail::merge_params(name, {{"n", 2.0}, {"L", 1.0}}, given);
    const double n = e.params["n"], L = e.params["L"];
    if (n < 2.0) throw ParameterError("sinusoidal-potential needs n >= 2");
    if (!(L > 0.0)) throw ParameterError("sinusoidal-potential needs L > 0");
    e.description = "a = 1, V even with V'(x) = x^n (n+1 + sin x) for x >= 0";
    e.spec = {detail::real_line(), parse("1"),
              parse("-sign(x)*abs(x)^" + num(n) + "*(" + detail::format_number(n + 1) + "+sin(abs(x)))"), {}};
    e.metric = MetricSpec(parse("x"));
    e.phi = detail::sinusoidal_potential_phi(n, L);
    e.x_init = 1.0;
    e.y_init = -1.0;
  } else if (name == "power-potential") {
    e.params = detail::merge_params(name, {{"C1", 1.0}, {"r", 2.0}, {"kappa", 0.0}}, given);
    const double c1 = e.params["C1"], r = e.params["r"], kappa = e.params["kappa"];
    if (!(c1 > 0.0) || !(r > 0.0)) throw ParameterError("power-potential needs C1 > 0 and r > 0");
    if (kappa < 0.0) throw ParameterError("power-potential needs kappa >= 0");
    e.description = "V = C1 |x|^r, a = 1 + kappa sin^2 x, b = -V'";
    const bool even = std::fmod(r, 2.0) == 0.0;
    const std::string drift = even ? "-" + num(c1 * r) + "*x^" + num(r - 1)
                                   : "-" + num(c1 * r) + "*sign(x)*abs(x)^" + num(r - 1);
    const std::string diff = kappa == 0.0 ? "1" : "1+" + num(kappa) + "*sin(x)^2";
    e.spec = {detail::real_line(), parse(diff), parse(drift), {}};
    e.metric = MetricSpec(parse("x"));
    if (r >= 2.0) e.phi = parse("1");
    e.x_init = 1.0;
    e.y_init = 0.0;
    e.cw_status = r >= 2.0 ? "finite" : "unbounded suspected";
  } else if (name == "jacobi") {
    e.params = detail::merge_params(name, {}, given);
    e.description = "Jacobi: a = x(1-x), b = 1/2 - x on [0, 1], intrinsic metric";
    e.spec = {Interval{0.0, 1.0, true, true}, parse("x*(1-x)"), parse("0.5-x"), {}};
    e.metric = MetricSpec(parse("pi/2+asin(2*x-1)"));
    e.phi = parse("1/sqrt(x*(1-x))");
    e.x_init = 0.2;
    e.y_init = 0.8;
    e.expected = {{"c_w", pi * pi / 8, 1e-4, "sup of pi^2/8 - asin(2x-1)^2/2 at x = 1/2"},
                  {"part_b.delta", 8 / (pi * pi), 1e-4, "1 / c_w"}};
  } else if (name == "branching") {
    e.params = detail::merge_params(name, {}, given);
    e.description = "continuous branching: a = 2x, b = 1 - 2x on [0, inf), rho = sqrt(2x)";
    e.spec = {Interval{0.0, kInfinity, true, false}, parse("2*x"), parse("1-2*x"), {}};
    e.metric = MetricSpec(parse("sqrt(2*x)"));
    e.x_init = 0.5;
    e.y_init = 2.0;
    e.expected = {{"c_w", 1.0, 1e-3, "sup of 1 - e^x erfc(sqrt x), approached as x -> inf"},
                  {"part_b.delta", 1.0, 1e-3, "1 / c_w"}};
  } else if (name == "bessel") {
    e.params = detail::merge_params(name, {{"beta", 3.0}}, given);
    const double beta = e.params["beta"];
    if (!(beta > 1.0)) throw ParameterError("bessel needs beta > 1");
    e.description = "reflected Bessel: a = 1/2, b = (beta-1)/(2x) on (0, 1]";
    e.spec = {Interval{0.0, 1.0, false, true}, parse("0.5"), parse(num(0.5 * (beta - 1)) + "/x"), {}};
    e.metric = MetricSpec(parse("x"));
    e.phi = parse("1");
    e.alpha = 0.25;
    e.x_init = 0.3;
    e.y_init = 0.9;
    const double a = 0.25, k = 2 * (beta + 1);
    e.expected = {{"c_w", 1 / k, 1e-6, "sup of 2(x - x^2)/(beta+1) at x = 1/2"},
                  {"mean_rho", beta / (beta + 1), 1e-8, "mean of beta x^(beta-1)"},
                  {"part_a.delta", k / (a * k + 1), 1e-6, "2(beta+1)/(2 alpha (beta+1) + 1) at alpha = 1/4"},
                  {"part_a.K", 0.5 * (1 / (a * k) + 1), 1e-6, "(1/(2 alpha (beta+1)) + 1)/2 at alpha = 1/4"}};
  } else {
    throw ParameterError("unknown catalog entry '" + name + "'");
  }
  return e;
}

}  // namespace diffcert
