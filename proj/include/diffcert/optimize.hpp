#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "diffcert/error.hpp"
#include "diffcert/parallel.hpp"

namespace diffcert {

struct SupResult {
  double arg = 0.0;
  double value = -std::numeric_limits<double>::infinity();
};

/// Samples of f at the midpoints of n equal cells of [lo, hi].
struct GridScan {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> x;
  std::vector<double> fx;

  std::size_t best() const {
    return static_cast<std::size_t>(std::max_element(fx.begin(), fx.end()) - fx.begin());
  }
};

template <class F>
GridScan scan_grid(F&& f, double lo, double hi, std::size_t n) {
  GridScan g;
  g.lo = lo;
  g.hi = hi;
  g.x.resize(n);
  g.fx.resize(n);
  const double h = (hi - lo) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) g.x[i] = lo + (static_cast<double>(i) + 0.5) * h;
  parallel_for(n, [&](std::size_t i) { g.fx[i] = f(g.x[i]); });
  return g;
}

/// Golden-section maximization of f on the open bracket (a, b); the ends
/// are never sampled.
template <class F>
SupResult golden_max(F&& f, double a, double b, double x_tol = 1e-12) {
  constexpr double r = 0.6180339887498949;  // (sqrt(5) - 1) / 2
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  SupResult best = fc >= fd ? SupResult{c, fc} : SupResult{d, fd};
  for (int it = 0; it < 200 && (b - a) > x_tol * std::max(1.0, std::fabs(best.arg)); ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
      if (fc > best.value) best = {c, fc};
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
      if (fd > best.value) best = {d, fd};
    }
  }
  return best;
}

/// Refines the best cell of a grid scan with golden-section search over its
/// two neighbouring cells.  Never returns less than the grid maximum.
template <class F>
SupResult refine_supremum(F&& f, const GridScan& g) {
  const std::size_t k = g.best();
  SupResult grid{g.x[k], g.fx[k]};
  const double h = (g.hi - g.lo) / static_cast<double>(g.x.size());
  const double a = std::max(g.lo, g.x[k] - h);
  const double b = std::min(g.hi, g.x[k] + h);
  const SupResult local = golden_max(f, a, b);
  return local.value > grid.value ? local : grid;
}

/// sup of f over (lo, hi): coarse midpoint scan, then golden-section refinement
/// around the best cell.
template <class F>
SupResult supremum(F&& f, double lo, double hi, std::size_t n_coarse = 1024) {
  if (!(hi > lo)) throw ParameterError("supremum needs lo < hi");
  if (n_coarse < 2) throw ParameterError("supremum needs at least two grid cells");
  const GridScan g = scan_grid(f, lo, hi, n_coarse);
  return refine_supremum(f, g);
}

/// Bracketed root of f on [lo, hi] (secant steps safeguarded by bisection).
template <class F>
double find_root(F&& f, double lo, double hi, double tol = 1e-12) {
  double fa = f(lo), fb = f(hi);
  if (fa == 0.0) return lo;
  if (fb == 0.0) return hi;
  if ((fa > 0.0) == (fb > 0.0)) {
    throw RootError("no sign change on [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  double a = lo, b = hi;
  for (int it = 0; it < 300; ++it) {
    if (std::fabs(b - a) <= tol * std::max(1.0, std::fabs(a) + std::fabs(b)) * 0.5) break;
    const double mid = 0.5 * (a + b);
    double x = b - fb * (b - a) / (fb - fa);
    // Fall back to bisection when the secant step leaves the inner half of the bracket.
    const double q = std::fabs(b - a) * 0.25;
    if (!(std::isfinite(x)) || x <= std::min(a, b) + q || x >= std::max(a, b) - q || it % 4 == 3) x = mid;
    const double fx = f(x);
    if (fx == 0.0) return x;
    if ((fx > 0.0) == (fa > 0.0)) {
      a = x;
      fa = fx;
    } else {
      b = x;
      fb = fx;
    }
  }
  return std::fabs(fa) < std::fabs(fb) ? a : b;
}

}  // namespace diffcert
