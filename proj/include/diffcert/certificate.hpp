#pragma once

// c_W(rho), condition (C), the (delta, K) certificates, the alpha sweep and
// the intrinsic metric rho~ with rho~' = u.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "diffcert/error.hpp"
#include "diffcert/expr.hpp"
#include "diffcert/feller.hpp"
#include "diffcert/optimize.hpp"
#include "diffcert/parallel.hpp"
#include "diffcert/quadrature.hpp"

namespace diffcert {

using Domain = std::pair<double, double>;

/// Scan domain holding mu-mass >= 1 - tail_mass: [xi0 - w, xi0 + w] on
/// infinite sides (w by bisection on the tail mass), the endpoint itself on
/// finite sides.
inline Domain initial_scan_domain(const ScaleSpeed& ss, const AnalysisOptions& opt = {}) {
  const Interval& I = ss.interval();
  const double xi = ss.xi0();
  if (I.lower_finite() && I.upper_finite()) return {I.lower, I.upper};
  const double tol = 1e-6;
  auto outside = [&](double w) {
    double m = 0.0;
    if (!I.lower_finite()) m += ss.mass_below(xi - w, tol);
    if (!I.upper_finite()) m += ss.mass_above(xi + w, tol);
    return m;
  };
  double hi = 1.0;
  while (outside(hi) > opt.tail_mass) {
    hi *= 2.0;
    if (hi > 1e15) throw QuadratureError(outside(hi), 0.0, "tail mass does not vanish");
  }
  double lo = 0.0;
  for (int it = 0; it < 40 && hi - lo > 1e-3 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (outside(mid) > opt.tail_mass ? lo : hi) = mid;
  }
  return {I.lower_finite() ? I.lower : xi - hi, I.upper_finite() ? I.upper : xi + hi};
}

enum class CwStatus { Finite, UnboundedSuspected };

inline const char* to_string(CwStatus s) { return s == CwStatus::Finite ? "finite" : "unbounded suspected"; }

struct CwWidening {
  double lo = 0.0;
  double hi = 0.0;
  double sup = 0.0;
  double arg = 0.0;
  bool boundary_flag = false;
};

struct CwResult {
  CwStatus status = CwStatus::Finite;
  double c_w = std::numeric_limits<double>::quiet_NaN();
  double arg = std::numeric_limits<double>::quiet_NaN();
  bool boundary_flag = false;
  Domain domain{0.0, 0.0};
  std::vector<CwWidening> history;  // entry 0 is the initial scan
  std::string note;
};

namespace detail {

inline bool in_outer_band(double x, const Domain& d, double fraction) {
  const double band = fraction * (d.second - d.first);
  return x < d.first + band || x > d.second - band;
}

}  // namespace detail

/// c_W = sup u / rho' over the scan domain.  Infinite sides are widened by
/// doubling their distance from xi0 until the sup moves by at most
/// `stabilization_tol` (relative).  When the maximizer sits in the outer band
/// for `unbounded_widenings` consecutive widenings while the increments stop
/// shrinking, or the widening budget runs out, c_W is reported as unbounded.
inline CwResult compute_cw(const ScaleSpeed& ss, Domain domain, const AnalysisOptions& opt = {}) {
  if (!(domain.first < domain.second)) throw ParameterError("scan domain needs lo < hi");
  const Interval& I = ss.interval();
  const double xi = ss.xi0();
  auto ratio = [&](double x) { return ss.u_ratio(x, opt.scan_rel_tol); };

  CwResult out;
  SupResult best = supremum(ratio, domain.first, domain.second, opt.n_coarse);
  best.value = ss.u_ratio(best.arg, opt.rel_tol);
  out.history.push_back({domain.first, domain.second, best.value, best.arg,
                         detail::in_outer_band(best.arg, domain, opt.boundary_fraction)});

  const bool widen_lo = !I.lower_finite(), widen_hi = !I.upper_finite();
  if (widen_lo || widen_hi) {
    bool settled = false;
    for (int k = 1; k <= opt.max_widenings && !settled; ++k) {
      const Domain next{widen_lo ? xi - 2.0 * (xi - domain.first) : domain.first,
                        widen_hi ? xi + 2.0 * (domain.second - xi) : domain.second};
      SupResult cand = best;
      try {
        const std::size_t cells = std::max<std::size_t>(opt.n_coarse / 2, 64);
        if (widen_lo) {
          const auto s = supremum(ratio, next.first, domain.first, cells);
          if (s.value > cand.value) cand = s;
        }
        if (widen_hi) {
          const auto s = supremum(ratio, domain.second, next.second, cells);
          if (s.value > cand.value) cand = s;
        }
        if (cand.arg != best.arg) cand.value = ss.u_ratio(cand.arg, opt.rel_tol);
      } catch (const Error& e) {
        out.note = std::string("widening stopped: ") + e.what();
        out.status = out.history.back().boundary_flag ? CwStatus::UnboundedSuspected : CwStatus::Finite;
        break;
      }
      const double previous = best.value;
      if (cand.value > best.value) best = cand;
      domain = next;
      out.history.push_back(
          {domain.first, domain.second, best.value, best.arg, detail::in_outer_band(best.arg, domain, opt.boundary_fraction)});

      if (best.value - previous <= opt.stabilization_tol * std::fabs(previous)) {
        settled = true;
        break;
      }
      const std::size_t n = out.history.size();
      const auto need = static_cast<std::size_t>(opt.unbounded_widenings);
      if (n > need && n >= 4) {
        bool flagged = true;
        for (std::size_t i = n - need; i < n; ++i) flagged = flagged && out.history[i].boundary_flag;
        const double d1 = out.history[n - 1].sup - out.history[n - 2].sup;
        const double d2 = out.history[n - 2].sup - out.history[n - 3].sup;
        const double d3 = out.history[n - 3].sup - out.history[n - 4].sup;
        const double g = opt.unbounded_growth_ratio;
        if (flagged && d1 > 0 && d2 > 0 && d3 > 0 && d1 >= g * d2 && d2 >= g * d3) {
          out.status = CwStatus::UnboundedSuspected;
          break;
        }
      }
      if (k == opt.max_widenings) {
        out.status = CwStatus::UnboundedSuspected;
        out.note = "sup did not stabilize within the widening budget";
      }
    }
  }
  out.c_w = best.value;
  out.arg = best.arg;
  out.domain = domain;
  out.boundary_flag = out.history.back().boundary_flag;
  return out;
}

// ---------------------------------------------------------------------------

struct ConditionC {
  Expr phi;
  Expr flux_derivative;  // (a phi' + b phi)'
  double C = std::numeric_limits<double>::quiet_NaN();
  double inf_ratio = std::numeric_limits<double>::quiet_NaN();
  double M = 0.0;
  double M_raw = std::numeric_limits<double>::quiet_NaN();
  bool lower_ok = false;
};

/// rho' <= phi <= C rho' and (a phi' + b phi)' <= M rho' on the scan domain.
/// M is clamped to 0 below `m_zero_tol`.
inline ConditionC condition_C_check(const DiffusionSpec& spec, const MetricSpec& metric, const Expr& phi,
                                    Domain domain, const AnalysisOptions& opt = {}) {
  ConditionC out;
  out.phi = phi;
  const Expr dphi = differentiate(phi);
  out.flux_derivative = differentiate(spec.a * dphi + spec.b * phi);
  auto q = [&](double x) { return phi(x) / metric.derivative(x); };
  out.C = supremum(q, domain.first, domain.second, opt.n_coarse).value;
  out.inf_ratio = -supremum([&](double x) { return -q(x); }, domain.first, domain.second, opt.n_coarse).value;
  out.lower_ok = out.inf_ratio >= 1.0 - opt.condition_c_lower_tol;
  const Expr& g = out.flux_derivative;
  out.M_raw = supremum([&](double x) { return g(x) / metric.derivative(x); }, domain.first, domain.second,
                       opt.n_coarse)
                  .value;
  out.M = out.M_raw > opt.m_zero_tol ? out.M_raw : 0.0;
  return out;
}

// ---------------------------------------------------------------------------

enum class CertMode { PartA, PartB };

inline const char* to_string(CertMode m) { return m == CertMode::PartA ? "part_a" : "part_b"; }

struct UTableRow {
  double x;
  double u;
  double u_over_rho_prime;
};

struct Certificate {
  CertMode mode = CertMode::PartB;
  double c_w = 0.0;
  double arg_cw = 0.0;
  std::vector<UTableRow> u_table;
  std::optional<ConditionC> condition_C;
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double delta = 0.0;
  double K = 1.0;
  double arg_K = std::numeric_limits<double>::quiet_NaN();
  double spectral_gap_lower = 0.0;
  std::string metric;  // "rho" for part (a), "rho_tilde" for part (b)
  std::string note;
};

struct SweepRow {
  double alpha;
  double delta;
  double K;
};

/// Sampled quantities reused by every K(alpha) evaluation:
/// r = u / rho' and q = phi / rho' on the coarse grid.
struct KGrid {
  GridScan r;
  std::vector<double> q;
};

/// The analysis pipeline for one (spec, rho) pair: scale/speed, hypotheses,
/// scan domain and c_W.  Certificates are derived on demand.
class Analysis {
 public:
  Analysis(DiffusionSpec spec, MetricSpec metric, AnalysisOptions opt = {})
      : spec_(std::move(spec)), metric_(std::move(metric)), opt_(opt),
        ss_(build_scale_speed(spec_, metric_, opt_, opt_.truncation)) {
    bulk_ = initial_scan_domain(ss_, opt_);
    hyp_ = check_hypotheses(ss_, probe_lo(), probe_hi(), opt_);
    if (opt_.enforce_hypotheses && hyp_.any_fail()) {
      throw NoCertificateError("a standing hypothesis failed (strict mode)");
    }
    cw_ = compute_cw(ss_, bulk_, opt_);
  }

  const DiffusionSpec& spec() const { return spec_; }
  const MetricSpec& metric() const { return metric_; }
  const AnalysisOptions& options() const { return opt_; }
  const ScaleSpeed& scale_speed() const { return ss_; }
  const HypothesisReport& hypotheses() const { return hyp_; }
  const CwResult& cw() const { return cw_; }
  Domain bulk_domain() const { return bulk_; }
  Domain scan_domain() const { return cw_.domain; }

  std::vector<UTableRow> u_table(std::size_t n = 0) const {
    if (n == 0) n = opt_.u_table_points;
    const Domain d = bulk_;
    std::vector<UTableRow> rows(n);
    const double h = (d.second - d.first) / static_cast<double>(n);
    parallel_for(n, [&](std::size_t i) {
      const double x = d.first + (static_cast<double>(i) + 0.5) * h;
      const double u = ss_.u(x, opt_.rel_tol);
      rows[i] = {x, u, u / metric_.derivative(x)};
    });
    return rows;
  }

  ConditionC condition_C(const Expr& phi) const { return condition_C_check(spec_, metric_, phi, cw_.domain, opt_); }

  KGrid k_grid(const Expr& phi) const {
    KGrid g;
    g.r = scan_grid([&](double x) { return ss_.u_ratio(x, opt_.scan_rel_tol); }, cw_.domain.first, cw_.domain.second,
                    opt_.n_coarse);
    g.q.resize(g.r.x.size());
    for (std::size_t i = 0; i < g.q.size(); ++i) g.q[i] = phi(g.r.x[i]) / metric_.derivative(g.r.x[i]);
    return g;
  }

  /// K(alpha) = (1/alpha) sup (u + alpha phi) / rho'.
  SupResult k_value(const Expr& phi, double alpha, const KGrid& g) const {
    auto f = [&](double x) {
      return (ss_.u(x, opt_.scan_rel_tol) + alpha * phi(x)) / (alpha * metric_.derivative(x));
    };
    GridScan s = g.r;
    for (std::size_t i = 0; i < s.fx.size(); ++i) s.fx[i] = (g.r.fx[i] + alpha * g.q[i]) / alpha;
    SupResult best = refine_supremum(f, s);
    best.value = (ss_.u(best.arg, opt_.rel_tol) + alpha * phi(best.arg)) / (alpha * metric_.derivative(best.arg));
    return best;
  }

  /// Log-spaced alphas over [1e-4, 1) * alpha_max with alpha_max = 1/M, or
  /// alpha_max_factor * c_W when M = 0.
  std::vector<double> sweep_alphas(const ConditionC& cc, std::size_t n) const {
    if (n < 2) throw ParameterError("alpha sweep needs at least two points");
    const bool capped = cc.M > 0.0;
    const double amax = capped ? 1.0 / cc.M : opt_.alpha_max_factor * cw_.c_w;
    std::vector<double> a(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double e = -4.0 + 4.0 * static_cast<double>(k) / static_cast<double>(n - 1);
      a[k] = amax * std::pow(10.0, e);
    }
    if (capped) a.back() = amax * (1.0 - 1e-6);
    return a;
  }

  std::vector<SweepRow> alpha_sweep(const Expr& phi, std::size_t n = 0) const {
    require_finite_cw();
    const ConditionC cc = condition_C(phi);
    require_condition(cc);
    const KGrid g = k_grid(phi);
    std::vector<SweepRow> rows;
    for (double a : sweep_alphas(cc, n == 0 ? opt_.sweep_points : n)) {
      rows.push_back({a, delta_a(cc, a), k_value(phi, a, g).value});
    }
    return rows;
  }

  /// Part (a) certificate when phi is given, part (b) otherwise.
  Certificate certify(const std::optional<Expr>& phi = std::nullopt,
                      std::optional<double> alpha = std::nullopt) const {
    require_finite_cw();
    Certificate cert;
    cert.c_w = cw_.c_w;
    cert.arg_cw = cw_.arg;
    cert.spectral_gap_lower = 1.0 / cw_.c_w;
    cert.u_table = u_table();
    if (!phi) {
      cert.mode = CertMode::PartB;
      cert.delta = 1.0 / cw_.c_w;
      cert.K = 1.0;
      cert.metric = "rho_tilde";
      return cert;
    }
    cert.mode = CertMode::PartA;
    cert.metric = "rho";
    const ConditionC cc = condition_C(*phi);
    require_condition(cc);
    cert.condition_C = cc;
    const KGrid g = k_grid(*phi);
    double a;
    if (alpha) {
      a = *alpha;
      if (!(a > 0.0) || (cc.M > 0.0 && !(a * cc.M < 1.0))) {
        throw ParameterError("alpha must lie in (0, 1/M) with M = " + std::to_string(cc.M));
      }
    } else {
      const auto grid = sweep_alphas(cc, opt_.sweep_points);
      a = grid.back();
      for (double cand : grid) {
        if (k_value(*phi, cand, g).value <= opt_.k_cap) {
          a = cand;
          break;
        }
      }
      if (k_value(*phi, a, g).value > opt_.k_cap) cert.note = "no sweep alpha meets the K cap; largest alpha used";
    }
    const SupResult k = k_value(*phi, a, g);
    cert.alpha = a;
    cert.delta = delta_a(cc, a);
    cert.K = k.value;
    cert.arg_K = k.arg;
    return cert;
  }

 private:
  double probe_lo() const { return spec_.interval.lower_finite() ? spec_.interval.lower : bulk_.first; }
  double probe_hi() const { return spec_.interval.upper_finite() ? spec_.interval.upper : bulk_.second; }

  double delta_a(const ConditionC& cc, double a) const { return (1.0 - a * cc.M) / (cc.C * a + cw_.c_w); }

  void require_finite_cw() const {
    if (cw_.status != CwStatus::Finite) {
      throw NoCertificateError("c_W unbounded suspected (sup " + std::to_string(cw_.c_w) + " still growing at x = " +
                               std::to_string(cw_.arg) + ")");
    }
  }

  static void require_condition(const ConditionC& cc) {
    if (!cc.lower_ok) {
      throw NoCertificateError("condition (C) fails: inf phi/rho' = " + std::to_string(cc.inf_ratio) + " < 1");
    }
    if (!std::isfinite(cc.C)) throw NoCertificateError("condition (C) fails: phi/rho' is unbounded");
  }

  DiffusionSpec spec_;
  MetricSpec metric_;
  AnalysisOptions opt_;
  ScaleSpeed ss_;
  Domain bulk_;
  HypothesisReport hyp_;
  CwResult cw_;
};

inline Certificate certify(const DiffusionSpec& spec, const MetricSpec& metric, const std::optional<Expr>& phi = {},
                           std::optional<double> alpha = {}, const AnalysisOptions& opt = {}) {
  return Analysis(spec, metric, opt).certify(phi, alpha);
}

inline double spectral_gap_lower_bound(const Certificate& cert) { return cert.spectral_gap_lower; }

// ---------------------------------------------------------------------------

/// rho~(x) = \int_c^x u with c the base point.  Tabulated on a uniform grid
/// over `range` (corrected trapezoid, using u' from the ODE) and interpolated
/// by quintic Hermite pieces matching rho~, u and u'.  Outside the grid the
/// primitive is extended by quadrature of u, or linearly at an endpoint.
class TildeMetric {
 public:
  TildeMetric(const ScaleSpeed& ss, Domain range, std::size_t cells = 2048, double rel_tol = 1e-9)
      : ss_(ss), rel_tol_(rel_tol) {
    const Interval& I = ss.interval();
    const double inset = 1e-9 * std::max(1.0, range.second - range.first);
    lo_ = std::max(range.first, I.lower + inset);
    hi_ = std::min(range.second, I.upper - inset);
    if (!(lo_ < hi_)) throw ParameterError("tilde metric range is empty");
    h_ = (hi_ - lo_) / static_cast<double>(cells);
    x_.resize(cells + 1);
    u_.resize(cells + 1);
    du_.resize(cells + 1);
    parallel_for(cells + 1, [&](std::size_t i) {
      x_[i] = i == cells ? hi_ : lo_ + h_ * static_cast<double>(i);
      u_[i] = ss.u(x_[i], rel_tol);
      du_[i] = ss.u_prime(x_[i], u_[i]);
    });
    p_.assign(cells + 1, 0.0);
    for (std::size_t i = 0; i < cells; ++i) {
      const double w = x_[i + 1] - x_[i];
      p_[i + 1] = p_[i] + 0.5 * w * (u_[i] + u_[i + 1]) + w * w / 12.0 * (du_[i] - du_[i + 1]);
    }
    const double c = ss.base_point();
    const double shift = c >= lo_ && c <= hi_ ? interpolate(c) : raw(c);
    for (auto& v : p_) v -= shift;
  }

  double operator()(double x) const {
    if (x >= lo_ && x <= hi_) return interpolate(x);
    return raw(x);
  }

  /// rho~' = u (exact, not interpolated).
  double derivative(double x) const { return ss_.u(x, rel_tol_); }

  Domain range() const { return {lo_, hi_}; }

 private:
  double raw(double x) const {
    const Interval& I = ss_.interval();
    if (!I.contains(x)) throw EvalError("rho_tilde", x, "point outside the state interval");
    const bool below = x < lo_;
    const double edge = below ? lo_ : hi_;
    const double base = below ? p_.front() : p_.back();
    const double edge_u = below ? u_.front() : u_.back();
    const double end = below ? I.lower : I.upper;
    if (std::isfinite(end) && std::fabs(edge - end) <= 1e-6 * std::max(1.0, hi_ - lo_)) {
      return base + edge_u * (x - edge);
    }
    QuadOptions qo;
    qo.abs_tol = 1e-300;
    auto u = [&](double y) { return ss_.u(y, rel_tol_); };
    return base + integrate(u, edge, x, 1e-8, qo).value;
  }

  double interpolate(double x) const {
    std::size_t i = static_cast<std::size_t>((x - lo_) / h_);
    if (i >= x_.size() - 1) i = x_.size() - 2;
    while (i > 0 && x < x_[i]) --i;
    while (i + 2 < x_.size() && x > x_[i + 1]) ++i;
    const double w = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / w;
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    const double h0 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
    const double h1 = t - 6 * t3 + 8 * t4 - 3 * t5;
    const double h2 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5);
    const double h3 = 10 * t3 - 15 * t4 + 6 * t5;
    const double h4 = -4 * t3 + 7 * t4 - 3 * t5;
    const double h5 = 0.5 * (t3 - 2 * t4 + t5);
    return p_[i] * h0 + w * u_[i] * h1 + w * w * du_[i] * h2 + p_[i + 1] * h3 + w * u_[i + 1] * h4 +
           w * w * du_[i + 1] * h5;
  }

  ScaleSpeed ss_;
  double rel_tol_;
  double lo_ = 0.0, hi_ = 0.0, h_ = 0.0;
  std::vector<double> x_, u_, du_, p_;
};

inline TildeMetric tilde_metric(const Analysis& an) { return TildeMetric(an.scale_speed(), an.bulk_domain()); }

}  // namespace diffcert
