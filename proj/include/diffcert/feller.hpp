#pragma once

// Scale and speed of a one-dimensional diffusion L = a d^2/dx^2 + b d/dx,
// its invariant law, the standing hypotheses and the function u.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "diffcert/antiderivative.hpp"
#include "diffcert/divergence.hpp"
#include "diffcert/error.hpp"
#include "diffcert/expr.hpp"
#include "diffcert/optimize.hpp"
#include "diffcert/quadrature.hpp"

namespace diffcert {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct Interval {
  double lower = -kInfinity;
  double upper = kInfinity;
  bool lower_closed = false;
  bool upper_closed = false;

  bool lower_finite() const { return std::isfinite(lower); }
  bool upper_finite() const { return std::isfinite(upper); }
  bool interior(double x) const { return x > lower && x < upper; }
  bool contains(double x) const {
    return interior(x) || (lower_closed && x == lower) || (upper_closed && x == upper);
  }
  /// Width for a bounded interval, 1 otherwise.
  double scale() const { return lower_finite() && upper_finite() ? upper - lower : 1.0; }

  void validate() const {
    if (std::isnan(lower) || std::isnan(upper) || !(lower < upper)) {
      throw ParameterError("interval needs lower < upper");
    }
    if ((lower_closed && !lower_finite()) || (upper_closed && !upper_finite())) {
      throw ParameterError("an infinite endpoint cannot be closed");
    }
  }
};

struct DiffusionSpec {
  Interval interval;
  Expr a;
  Expr b;
  std::optional<double> base_point;
};

/// Increasing function rho defining d(x, y) = |rho(x) - rho(y)|.
class MetricSpec {
 public:
  MetricSpec() : MetricSpec(Expr::variable()) {}
  explicit MetricSpec(Expr rho) : rho_(std::move(rho)), rho_prime_(differentiate(rho_)) {}

  double operator()(double x) const { return rho_(x); }
  double derivative(double x) const { return rho_prime_(x); }
  const Expr& rho() const { return rho_; }
  const Expr& rho_prime() const { return rho_prime_; }

 private:
  Expr rho_;
  Expr rho_prime_;
};

struct AnalysisOptions {
  double rel_tol = 1e-9;
  double scan_rel_tol = 1e-6;
  std::size_t n_coarse = 1024;
  std::size_t probe_points = 4096;
  double tail_mass = 1e-6;
  double stabilization_tol = 1e-4;
  double boundary_fraction = 0.02;
  int max_widenings = 40;
  int unbounded_widenings = 3;
  double unbounded_growth_ratio = 0.9;
  double condition_c_lower_tol = 1e-9;
  double m_zero_tol = 1e-9;
  double k_cap = 100.0;
  std::size_t sweep_points = 64;
  double alpha_max_factor = 10.0;
  std::size_t u_table_points = 101;
  bool enforce_hypotheses = false;
  std::optional<std::pair<double, double>> truncation;  // normalization range override
  DivergenceOptions divergence;
};

namespace detail {

inline double default_anchor(const Interval& I) {
  if (I.lower_finite() && I.upper_finite()) return 0.5 * (I.lower + I.upper);
  if (I.lower_finite()) return I.lower + 1.0;
  if (I.upper_finite()) return I.upper - 1.0;
  return 0.0;
}

// Integral over (lo, hi) split at c, so each half has at most one awkward end.
template <class F>
double split_integral(F&& f, double lo, double c, double hi, double rel_tol) {
  QuadOptions qo;
  qo.abs_tol = 1e-300;
  qo.center = c;
  return integrate(f, lo, c, rel_tol, qo).value + integrate(f, c, hi, rel_tol, qo).value;
}

}  // namespace detail

/// Probes of a > 0 (ellipticity) on `n` interior points of [lo, hi].
struct EllipticityProbe {
  bool ok = true;
  double x = 0.0;
  double value = 0.0;
  std::string message;
};

inline EllipticityProbe probe_positive(const Expr& f, double lo, double hi, std::size_t n) {
  EllipticityProbe p;
  const double h = (hi - lo) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = lo + (static_cast<double>(i) + 0.5) * h;
    double v;
    try {
      v = f(x);
    } catch (const EvalError& e) {
      return {false, x, std::numeric_limits<double>::quiet_NaN(), e.what()};
    }
    if (!(v > 0.0)) return {false, x, v, "not positive at x = " + std::to_string(x)};
  }
  return p;
}

/// Scale density s' = exp(-B), speed density m' = exp(B) / a with
/// B(x) = \int_c^x b/a, plus the normalized law mu and xi0 with rho(xi0) = mu(rho).
class ScaleSpeed {
 public:
  struct State {
    DiffusionSpec spec;
    MetricSpec metric;
    double c = 0.0;
    std::shared_ptr<const Antiderivative> B;
    double lower = -kInfinity;  // normalization range
    double upper = kInfinity;
    double m_total = 0.0;
    double mean_rho = 0.0;
    double xi0 = 0.0;
  };

  explicit ScaleSpeed(std::shared_ptr<const State> s) : s_(std::move(s)) {}

  const DiffusionSpec& spec() const { return s_->spec; }
  const MetricSpec& metric() const { return s_->metric; }
  const Interval& interval() const { return s_->spec.interval; }
  double base_point() const { return s_->c; }
  double m_total() const { return s_->m_total; }
  double mean_rho() const { return s_->mean_rho; }
  double xi0() const { return s_->xi0; }

  double B(double x) const { return (*s_->B)(x); }
  double s_prime(double x) const { return finite(std::exp(-B(x)), x, "s'"); }
  double m_prime(double x) const { return finite(std::exp(B(x)) / s_->spec.a(x), x, "m'"); }
  double density(double x) const { return m_prime(x) / s_->m_total; }

  /// u(x) = s'(x) \int_x^{upper} (rho - mu(rho)) m', evaluated in the form that
  /// keeps the integrand sign-definite: the lower-tail identity is used left of xi0.
  double u(double x, double rel_tol) const {
    return tail_integral(x, rel_tol, [this](double y) { return s_->metric(y) - s_->mean_rho; });
  }

  double u_ratio(double x, double rel_tol) const { return u(x, rel_tol) / s_->metric.derivative(x); }

  /// u' from the equation a u' + b u = -(rho - mu(rho)).
  double u_prime(double x, double u_value) const {
    return -(s_->spec.b(x) * u_value + (s_->metric(x) - s_->mean_rho)) / s_->spec.a(x);
  }

  /// mu-mass of (x, upper) or (lower, x).
  double mass_above(double x, double rel_tol) const {
    QuadOptions qo;
    qo.abs_tol = 1e-300;
    return integrate([this](double y) { return m_prime(y); }, x, s_->upper, rel_tol, qo).value / s_->m_total;
  }
  double mass_below(double x, double rel_tol) const {
    QuadOptions qo;
    qo.abs_tol = 1e-300;
    return integrate([this](double y) { return m_prime(y); }, s_->lower, x, rel_tol, qo).value / s_->m_total;
  }

 private:
  template <class G>
  double tail_integral(double x, double rel_tol, G&& g) const {
    if (!s_->spec.interval.interior(x)) throw EvalError("u", x, "u is only defined at interior points");
    const double Bx = B(x);
    const auto& a = s_->spec.a;
    QuadOptions qo;
    qo.abs_tol = 1e-300;
    const bool upper_side = x >= s_->xi0;
    const double end = upper_side ? s_->upper : s_->lower;
    double tol = rel_tol;
    if (std::isfinite(end)) {
      // B near a finite endpoint away from 0 inherits the rounding of the coordinate.
      constexpr double k = 64 * std::numeric_limits<double>::epsilon();
      tol = std::min(1e-3, std::max(tol, k * std::fabs(end) / std::fabs(end - x)));
    }
    auto run = [&](auto&& f, double lo, double hi) {
      try {
        return integrate(f, lo, hi, tol, qo).value;
      } catch (const QuadratureError& e) {
        const double slack = std::isfinite(end) ? std::max(10 * tol, 1e-6) : 10 * tol;
        if ((tol > rel_tol || std::isfinite(end)) && std::isfinite(e.best_estimate()) &&
            e.error_bound() <= slack * std::fabs(e.best_estimate())) {
          return e.best_estimate();
        }
        throw;
      }
    };
    if (upper_side) {
      return run([&](double y) { return g(y) * std::exp(B(y) - Bx) / a(y); }, x, s_->upper);
    }
    return run([&](double y) { return -g(y) * std::exp(B(y) - Bx) / a(y); }, s_->lower, x);
  }

  static double finite(double v, double x, const char* what) {
    if (!std::isfinite(v)) throw OverflowError(std::string(what) + " overflowed at x = " + std::to_string(x));
    return v;
  }

  std::shared_ptr<const State> s_;
};

namespace detail {

inline std::shared_ptr<const Antiderivative> drift_integral(const DiffusionSpec& spec, double c) {
  Antiderivative::Layout lay;
  lay.lower = spec.interval.lower;
  lay.upper = spec.interval.upper;
  lay.anchor = c;
  const Expr a = spec.a, b = spec.b;
  return std::make_shared<const Antiderivative>([a, b](double x) { return b(x) / a(x); }, lay);
}

// Bracket [p, q] with rho(p) < target < rho(q), searched outward from c.
inline std::pair<double, double> bracket_level(const MetricSpec& rho, const Interval& I, double c, double target) {
  auto step = [c](double end, int k) {
    if (std::isfinite(end)) return c + (end - c) * (1.0 - std::ldexp(1.0, -k));
    return end > 0 ? c + std::ldexp(1.0, k - 1) : c - std::ldexp(1.0, k - 1);
  };
  auto search = [&](double end, bool below) {
    double x = c;
    for (int k = 1; k <= 1100; ++k) {
      if (below ? rho(x) < target : rho(x) > target) return x;
      const double next = step(end, k);
      if (!I.interior(next) || next == x) break;
      x = next;
    }
    throw RootError("could not bracket rho = mu(rho)");
  };
  return {search(I.lower, true), search(I.upper, false)};
}

inline void normalize(ScaleSpeed::State& s, double rel_tol) {
  const ScaleSpeed view(std::shared_ptr<const ScaleSpeed::State>(&s, [](const ScaleSpeed::State*) {}));
  try {
    s.m_total = split_integral([&](double y) { return view.m_prime(y); }, s.lower, s.c, s.upper, rel_tol);
    const double first =
        split_integral([&](double y) { return s.metric(y) * view.m_prime(y); }, s.lower, s.c, s.upper, rel_tol);
    s.mean_rho = first / s.m_total;
  } catch (const QuadratureError& e) {
    throw QuadratureError(e.best_estimate(), e.error_bound(),
                          std::string("speed measure normalization failed (is m(I) finite?): ") + e.what());
  }
  if (!(s.m_total > 0.0) || !std::isfinite(s.m_total)) throw OverflowError("speed measure is not finite");
}

}  // namespace detail

/// Builds s', m', B and the normalization of the speed measure.  The base point
/// defaults to xi0 (root of rho - mu(rho)).  `truncation`, when given,
/// restricts the normalization integrals.
inline ScaleSpeed build_scale_speed(const DiffusionSpec& spec, const MetricSpec& metric,
                                    const AnalysisOptions& opt = {},
                                    std::optional<std::pair<double, double>> truncation = std::nullopt) {
  const Interval& I = spec.interval;
  I.validate();
  if (spec.base_point && !I.interior(*spec.base_point)) throw ParameterError("base point must lie inside the interval");

  auto state = std::make_shared<ScaleSpeed::State>();
  state->spec = spec;
  state->metric = metric;
  state->lower = I.lower;
  state->upper = I.upper;
  if (truncation) {
    if (!(truncation->first >= I.lower && truncation->second <= I.upper && truncation->first < truncation->second)) {
      throw ParameterError("truncation must be a sub-interval of the state interval");
    }
    state->lower = truncation->first;
    state->upper = truncation->second;
  }

  const double lo_probe = I.lower_finite() ? I.lower : detail::default_anchor(I) - 16.0;
  const double hi_probe = I.upper_finite() ? I.upper : detail::default_anchor(I) + 16.0;
  const auto ell = probe_positive(spec.a, std::max(lo_probe, state->lower), std::min(hi_probe, state->upper),
                                  opt.probe_points);
  if (!ell.ok) throw EllipticityError(ell.x, ell.value, "a(x) must be positive inside the interval: " + ell.message);

  double c = spec.base_point.value_or(detail::default_anchor(I));
  if (truncation && !(c > state->lower && c < state->upper)) c = 0.5 * (state->lower + state->upper);
  state->c = c;
  state->B = detail::drift_integral(spec, c);
  detail::normalize(*state, opt.rel_tol);

  const auto br = detail::bracket_level(metric, I, c, state->mean_rho);
  state->xi0 = find_root([&](double x) { return metric(x) - state->mean_rho; }, br.first, br.second, 1e-14);

  if (!spec.base_point && state->xi0 != c) {
    state->c = state->xi0;
    state->B = detail::drift_integral(spec, state->xi0);
    detail::normalize(*state, opt.rel_tol);
  }
  return ScaleSpeed(std::move(state));
}

/// u(x) at the analysis tolerance.
inline double compute_u(const ScaleSpeed& ss, double x, double rel_tol = 1e-9) { return ss.u(x, rel_tol); }

// ---------------------------------------------------------------------------
// Hypotheses.

enum class Verdict { Pass, Fail, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    default: return "inconclusive";
  }
}

struct EndpointCheck {
  std::string endpoint;  // "lower" or "upper"
  Verdict verdict = Verdict::Inconclusive;
  DivergenceVerdict divergence;
  std::string message;
};

struct HypothesisReport {
  Verdict h1 = Verdict::Inconclusive;
  std::size_t h1_probes = 0;
  std::string h1_message;
  std::vector<EndpointCheck> h2;
  Verdict h3 = Verdict::Inconclusive;
  double m_total = std::numeric_limits<double>::quiet_NaN();
  std::vector<EndpointCheck> h4;
  std::string message;
  Verdict rho_in_L2 = Verdict::Inconclusive;
  double rho_second_moment = std::numeric_limits<double>::quiet_NaN();

  bool all_pass() const {
    auto ok = [](const std::vector<EndpointCheck>& v) {
      return std::all_of(v.begin(), v.end(), [](const EndpointCheck& e) { return e.verdict == Verdict::Pass; });
    };
    return h1 == Verdict::Pass && h3 == Verdict::Pass && rho_in_L2 == Verdict::Pass && ok(h2) && ok(h4);
  }
  bool any_fail() const {
    auto bad = [](const std::vector<EndpointCheck>& v) {
      return std::any_of(v.begin(), v.end(), [](const EndpointCheck& e) { return e.verdict == Verdict::Fail; });
    };
    return h1 == Verdict::Fail || h3 == Verdict::Fail || rho_in_L2 == Verdict::Fail || bad(h2) || bad(h4);
  }
};

/// Sign probes of a and rho' on [lo, hi].
inline void check_h1(const DiffusionSpec& spec, const MetricSpec& metric, double lo, double hi, std::size_t n,
                     HypothesisReport& out) {
  out.h1_probes = n;
  const auto pa = probe_positive(spec.a, lo, hi, n);
  if (!pa.ok) {
    out.h1 = Verdict::Fail;
    out.h1_message = "a(x): " + pa.message;
    return;
  }
  const auto pr = probe_positive(metric.rho_prime(), lo, hi, n);
  if (!pr.ok) {
    out.h1 = Verdict::Fail;
    out.h1_message = "rho'(x): " + pr.message;
    return;
  }
  out.h1 = Verdict::Pass;
}

namespace detail {

inline std::vector<double> endpoint_cutoffs(double c, double end, double span) {
  std::vector<double> cut;
  if (std::isfinite(end)) {
    for (int k = 1; k <= 12; ++k) cut.push_back(end + (c - end) * std::pow(10.0, -k));
  } else {
    const double dir = end > 0 ? 1.0 : -1.0;
    for (int k = 0; k < 30; ++k) cut.push_back(c + dir * span * std::pow(2.0, 0.5 * k));
  }
  return cut;
}

inline Verdict verdict_from(Divergence d, bool want_divergence) {
  if (d == Divergence::Inconclusive) return Verdict::Inconclusive;
  return (d == Divergence::Diverges) == want_divergence ? Verdict::Pass : Verdict::Fail;
}

}  // namespace detail

/// H1 by probes on [probe_lo, probe_hi]; H2 (non-explosion) and H4 (s not
/// square-integrable against m) at every endpoint outside the interval; H3 by
/// finiteness of m(I); and the second moment of rho under mu.
inline HypothesisReport check_hypotheses(const ScaleSpeed& ss, double probe_lo, double probe_hi,
                                         const AnalysisOptions& opt = {}) {
  HypothesisReport rep;
  const auto& spec = ss.spec();
  const auto& I = spec.interval;
  check_h1(spec, ss.metric(), probe_lo, probe_hi, opt.probe_points, rep);
  rep.h3 = Verdict::Pass;
  rep.m_total = ss.m_total();

  const double c = ss.base_point();
  const double span = std::max(std::fabs(probe_hi - probe_lo) / 16.0, 1e-3);
  Antiderivative::Layout lay;
  lay.lower = I.lower;
  lay.upper = I.upper;
  lay.anchor = c;
  std::shared_ptr<const Antiderivative> M, S;
  auto m_fn = [&ss](double y) { return ss.m_prime(y); };
  auto s_fn = [&ss](double y) { return ss.s_prime(y); };

  for (int side = 0; side < 2; ++side) {
    const bool upper = side == 1;
    const double end = upper ? I.upper : I.lower;
    const bool closed = upper ? I.upper_closed : I.lower_closed;
    if (closed) continue;
    if (!M) {
      M = std::make_shared<const Antiderivative>(m_fn, lay);
      S = std::make_shared<const Antiderivative>(s_fn, lay);
    }
    const auto cut = detail::endpoint_cutoffs(c, end, span);
    const char* name = upper ? "upper" : "lower";
    EndpointCheck h2{name, Verdict::Inconclusive, {}, {}};
    EndpointCheck h4{name, Verdict::Inconclusive, {}, {}};
    try {
      h2.divergence = detect_divergence([&](double x) { return ss.s_prime(x) * std::fabs((*M)(x)); }, c, cut,
                                        opt.divergence);
      h2.verdict = detail::verdict_from(h2.divergence.verdict, true);
      h2.message = std::string("s'(x) m(c, x) integral ") + to_string(h2.divergence.verdict) + " toward the endpoint";
    } catch (const Error& e) {
      h2.message = e.what();
    }
    try {
      h4.divergence = detect_divergence(
          [&](double x) {
            const double s = (*S)(x);
            return s * s * ss.m_prime(x);
          },
          c, cut, opt.divergence);
      h4.verdict = detail::verdict_from(h4.divergence.verdict, true);
      h4.message = std::string("s(x)^2 m'(x) integral ") + to_string(h4.divergence.verdict) + " toward the endpoint";
    } catch (const Error& e) {
      h4.message = e.what();
    }
    rep.h2.push_back(std::move(h2));
    rep.h4.push_back(std::move(h4));
  }

  try {
    const auto& rho = ss.metric();
    rep.rho_second_moment =
        detail::split_integral([&](double y) { return rho(y) * rho(y) * ss.m_prime(y); }, I.lower, c, I.upper,
                               opt.rel_tol) /
        ss.m_total();
    rep.rho_in_L2 = std::isfinite(rep.rho_second_moment) ? Verdict::Pass : Verdict::Fail;
  } catch (const OverflowError&) {
    rep.rho_in_L2 = Verdict::Fail;
  } catch (const Error&) {
    rep.rho_in_L2 = Verdict::Inconclusive;
  }
  return rep;
}

/// Hypothesis check that does not presuppose a valid ScaleSpeed: H1 is probed
/// first, and a failure there (or an infinite speed measure) is reported as a
/// verdict instead of an exception.
inline HypothesisReport check_hypotheses(const DiffusionSpec& spec, const MetricSpec& metric,
                                         const AnalysisOptions& opt = {}) {
  spec.interval.validate();
  const double c0 = spec.base_point.value_or(detail::default_anchor(spec.interval));
  const double lo = spec.interval.lower_finite() ? spec.interval.lower : c0 - 16.0;
  const double hi = spec.interval.upper_finite() ? spec.interval.upper : c0 + 16.0;
  HypothesisReport rep;
  check_h1(spec, metric, lo, hi, opt.probe_points, rep);
  if (rep.h1 == Verdict::Fail) return rep;
  try {
    const ScaleSpeed ss = build_scale_speed(spec, metric, opt);
    return check_hypotheses(ss, lo, hi, opt);
  } catch (const Error& e) {
    rep.h3 = Verdict::Fail;
    rep.message = e.what();
    return rep;
  }
}

}  // namespace diffcert
