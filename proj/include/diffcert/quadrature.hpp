#pragma once

// Adaptive quadrature on finite, semi-infinite and infinite intervals.
//
// Smooth finite integrals go through a globally adaptive Gauss-Kronrod
// (10, 21) rule.  Endpoint singularities switch to tanh-sinh, and infinite
// endpoints use the exp-sinh substitution x = a + s * exp(pi/2 sinh t).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <queue>
#include <string>
#include <vector>

#include "diffcert/error.hpp"

namespace diffcert {

struct QuadResult {
  double value = 0.0;
  double abs_error = 0.0;
  std::size_t evaluations = 0;
};

struct QuadOptions {
  double abs_tol = 1e-14;
  std::size_t max_intervals = 2000;
  int max_level = 10;
  double scale = 1.0;   // length scale of the exp-sinh map
  double center = 0.0;  // split point for doubly infinite ranges
};

namespace detail {

inline constexpr double kXgk[11] = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};
inline constexpr double kWgk[11] = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208980029046, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
// Gauss weights for kXgk[1], kXgk[3], ..., kXgk[9].
inline constexpr double kWg[5] = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

template <class F>
double checked(F& f, double x, std::size_t& evals) {
  const double v = f(x);
  ++evals;
  if (!std::isfinite(v)) throw OverflowError("integrand is not finite at x = " + std::to_string(x));
  return v;
}

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gk21(F& f, double a, double b, std::size_t& evals) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = checked(f, c, evals);
  double k = kWgk[10] * fc;
  double g = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double dx = h * kXgk[i];
    const double s = checked(f, c - dx, evals) + checked(f, c + dx, evals);
    k += kWgk[i] * s;
    if (i % 2 == 1) g += kWg[i / 2] * s;
  }
  return {a, b, k * h, std::fabs((k - g) * h)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod on a finite interval.
template <class F>
QuadResult gauss_kronrod(F&& f, double a, double b, double rel_tol, const QuadOptions& opt = {}) {
  std::size_t evals = 0;
  std::priority_queue<detail::Segment> heap;
  const auto first = detail::gk21(f, a, b, evals);
  heap.push(first);
  double total = first.value, err = first.error;
  while (err > std::max(rel_tol * std::fabs(total), opt.abs_tol)) {
    if (heap.size() >= opt.max_intervals) {
      throw QuadratureError(total, err, "Gauss-Kronrod did not converge on [" + std::to_string(a) + ", " +
                                            std::to_string(b) + "]");
    }
    const auto worst = heap.top();
    heap.pop();
    const double m = 0.5 * (worst.a + worst.b);
    if (!(m > worst.a && m < worst.b)) {
      throw QuadratureError(total, err, "Gauss-Kronrod subdivision reached machine precision");
    }
    const auto l = detail::gk21(f, worst.a, m, evals);
    const auto r = detail::gk21(f, m, worst.b, evals);
    total += l.value + r.value - worst.value;
    err += l.error + r.error - worst.error;
    heap.push(l);
    heap.push(r);
  }
  // Re-sum to shed the drift of the running totals.
  total = 0.0;
  err = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  return {total, err, evals};
}

namespace detail {

// Shared level-refinement driver for the double-exponential rules.
// `term(t)` returns the weighted integrand at abscissa t (0 when the node
// falls outside the open interval).
template <class Term>
QuadResult double_exponential(Term&& term, double t_max, int quiet_nodes, double rel_tol, const QuadOptions& opt,
                              std::size_t& evals) {
  // Level 0 with unit spacing, marching outward until the terms die off.
  double sum = term(0.0);
  double peak = std::fabs(sum);
  double t_hi = 0.0, t_lo = 0.0;
  for (int side = -1; side <= 1; side += 2) {
    double last = 0.0;
    int quiet = 0;
    for (double t = 1.0; t <= t_max; t += 1.0) {
      const double v = term(side * t);
      sum += v;
      peak = std::max(peak, std::fabs(v));
      last = t;
      if (std::fabs(v) <= 1e-18 * peak || std::fabs(v) < 1e-300) {
        if (++quiet >= quiet_nodes) break;
      } else {
        quiet = 0;
      }
    }
    (side < 0 ? t_lo : t_hi) = last;
  }
  double h = 1.0;
  double estimate = sum;
  double previous = estimate;
  double error = std::numeric_limits<double>::infinity();
  for (int level = 1; level <= opt.max_level; ++level) {
    h *= 0.5;
    double odd = 0.0;
    for (double t = h; t <= t_hi; t += 2.0 * h) odd += term(t);
    for (double t = h; t <= t_lo; t += 2.0 * h) odd += term(-t);
    previous = estimate;
    estimate = 0.5 * previous + h * odd;
    error = std::fabs(estimate - previous);
    if (level >= 3 && error <= std::max(rel_tol * std::fabs(estimate), opt.abs_tol)) {
      return {estimate, error, evals};
    }
  }
  throw QuadratureError(estimate, error, "double-exponential quadrature did not converge");
}

}  // namespace detail

/// Tanh-sinh rule on a finite interval; tolerates integrable endpoint
/// singularities.  Endpoints are never sampled.
template <class F>
QuadResult tanh_sinh(F&& f, double a, double b, double rel_tol, const QuadOptions& opt = {}) {
  std::size_t evals = 0;
  const double half = 0.5 * (b - a);
  auto term = [&](double t) -> double {
    const double u = 0.5 * std::numbers::pi * std::sinh(t);
    const double e = std::exp(-2.0 * std::fabs(u));
    const double comp = 2.0 * e / (1.0 + e);  // 1 - tanh|u|
    const double w = 0.5 * std::numbers::pi * std::cosh(t) * 4.0 * e / ((1.0 + e) * (1.0 + e));
    if (w == 0.0 || comp == 0.0) return 0.0;
    const double x = t >= 0.0 ? b - half * comp : a + half * comp;
    if (!(x > a && x < b)) return 0.0;
    return half * w * detail::checked(f, x, evals);
  };
  return detail::double_exponential(term, 6.5, 2, rel_tol, opt, evals);
}

/// Exp-sinh rule on [a, +inf) (direction = +1) or (-inf, a] (direction = -1).
template <class F>
QuadResult exp_sinh(F&& f, double a, int direction, double rel_tol, const QuadOptions& opt = {}) {
  std::size_t evals = 0;
  const double s = opt.scale;
  auto term = [&](double t) -> double {
    const double g = std::exp(0.5 * std::numbers::pi * std::sinh(t));
    const double w = s * g * 0.5 * std::numbers::pi * std::cosh(t);
    if (!std::isfinite(w) || w == 0.0) return 0.0;
    const double x = a + direction * s * g;
    if (!std::isfinite(x) || x == a) return 0.0;
    return w * detail::checked(f, x, evals);
  };
  // Stop at the first negligible node: far nodes can sit at 1e6 * scale and beyond.
  return detail::double_exponential(term, 4.5, 1, rel_tol, opt, evals);
}

namespace detail {

template <class F>
bool blows_up_at(F& f, double end, double inward) {
  try {
    const double near = std::fabs(f(end + 1e-9 * inward));
    const double far = std::fabs(f(end + 1e-3 * inward));
    return std::isfinite(near) && near > 10.0 * far + 1e-300;
  } catch (const Error&) {
    return true;
  }
}

}  // namespace detail

/// Integral of f over (lo, hi); either limit may be infinite.  Throws
/// QuadratureError (carrying the best estimate) when the tolerance
/// max(rel_tol * |value|, abs_tol) cannot be met.
template <class F>
QuadResult integrate(F&& f, double lo, double hi, double rel_tol = 1e-9, const QuadOptions& opt = {}) {
  if (!(rel_tol > 1e-15 && rel_tol < 1e-1)) throw ParameterError("rel_tol must lie in (1e-15, 1e-1)");
  if (std::isnan(lo) || std::isnan(hi)) throw ParameterError("integration limits must not be NaN");
  if (lo == hi) return {};
  if (lo > hi) {
    auto r = integrate(f, hi, lo, rel_tol, opt);
    r.value = -r.value;
    return r;
  }
  const bool lo_inf = std::isinf(lo), hi_inf = std::isinf(hi);
  if (lo_inf && hi_inf) {
    const auto l = exp_sinh(f, opt.center, -1, rel_tol, opt);
    const auto r = exp_sinh(f, opt.center, +1, rel_tol, opt);
    return {l.value + r.value, l.abs_error + r.abs_error, l.evaluations + r.evaluations};
  }
  if (hi_inf) return exp_sinh(f, lo, +1, rel_tol, opt);
  if (lo_inf) return exp_sinh(f, hi, -1, rel_tol, opt);

  const double w = hi - lo;
  const bool singular = detail::blows_up_at(f, lo, w) || detail::blows_up_at(f, hi, -w);
  if (!singular) {
    try {
      return gauss_kronrod(f, lo, hi, rel_tol, opt);
    } catch (const QuadratureError&) {
    }
  }
  return tanh_sinh(f, lo, hi, rel_tol, opt);
}

}  // namespace diffcert
