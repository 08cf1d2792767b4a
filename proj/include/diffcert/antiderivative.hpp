#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "diffcert/error.hpp"
#include "diffcert/quadrature.hpp"

namespace diffcert {

/// F(x) = \int_anchor^x f, tabulated at construction on a node grid and
/// completed by a local quadrature from the nearest node at query time.
///
/// Nodes are uniform near the anchor.  Toward a finite endpoint they close in
/// geometrically (distances halving) so that integrable endpoint
/// singularities of f stay resolved.  Toward an infinite endpoint they grow
/// geometrically out to `far_limit`.  A side whose tabulation overflows is
/// cut short; queries beyond it integrate from the last node.
///
/// Immutable after construction; const members are safe to call concurrently
/// as long as f is.
class Antiderivative {
 public:
  using Fn = std::function<double(double)>;

  struct Layout {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    double anchor = 0.0;
    double scale = 1.0;
    std::size_t uniform_cells = 256;
    double uniform_extent = 16.0;  // in units of `scale`, infinite sides only
    double growth = 1.05;
    double far_limit = 1e15;
    double rel_tol = 1e-13;
  };

  Antiderivative(Fn f, const Layout& layout) : f_(std::move(f)), layout_(layout) { build(); }

  double anchor() const { return layout_.anchor; }

  double operator()(double x) const {
    if (x == layout_.anchor) return 0.0;
    if (x < nodes_.front() || x > nodes_.back()) {
      const std::size_t k = x < nodes_.front() ? 0 : nodes_.size() - 1;
      return values_[k] + piece(nodes_[k], x, layout_.rel_tol);
    }
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), x);
    std::size_t k = static_cast<std::size_t>(it - nodes_.begin());
    if (k == nodes_.size()) k = nodes_.size() - 1;
    if (k > 0 && std::fabs(nodes_[k - 1] - x) < std::fabs(nodes_[k] - x)) --k;
    if (nodes_[k] == x) return values_[k];
    return values_[k] + piece(nodes_[k], x, layout_.rel_tol);
  }

  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& values() const { return values_; }

 private:
  double piece(double from, double to, double rel_tol) const {
    QuadOptions qo;
    qo.abs_tol = 1e-300;
    const double lo = std::min(from, to), hi = std::max(from, to);
    QuadResult r;
    const bool at_edge = (hi >= layout_.upper) || (lo <= layout_.lower);
    if (at_edge) throw EvalError("antiderivative", to, "query outside the open interval");
    const double tol = std::max(rel_tol, coordinate_noise(lo, hi));
    if (hi > lo && tol > 1e-6) {
      // Node gaps shrink geometrically here, so one rule per gap suffices, and
      // adaptivity would only chase the rounding noise of the coordinate.
      std::size_t evals = 0;
      r.value = detail::gk21(f_, lo, hi, evals).value;
    } else if (hi > lo) {
      qo.max_intervals = 200;
      try {
        r = integrate(f_, lo, hi, tol, qo);
      } catch (const QuadratureError& e) {
        if (!std::isfinite(e.best_estimate()) ||
            !(e.error_bound() <= 1e-6 * std::max(1.0, std::fabs(e.best_estimate())))) {
          throw;
        }
        r.value = e.best_estimate();
      }
    }
    const double v = from <= to ? r.value : -r.value;
    if (!std::isfinite(v)) throw OverflowError("antiderivative overflowed");
    return v;
  }

  // Relative accuracy lost to rounding of x itself near a finite endpoint
  // far from zero (1 - x carries an absolute error of ulp(1)).
  double coordinate_noise(double lo, double hi) const {
    constexpr double k = 64 * std::numeric_limits<double>::epsilon();
    double t = 0.0;
    if (std::isfinite(layout_.lower)) t = std::max(t, k * std::fabs(layout_.lower) / (lo - layout_.lower));
    if (std::isfinite(layout_.upper)) t = std::max(t, k * std::fabs(layout_.upper) / (layout_.upper - hi));
    return t;
  }

  std::vector<double> side_nodes(int dir) const {
    const double a = layout_.anchor;
    const double end = dir > 0 ? layout_.upper : layout_.lower;
    const std::size_t n = layout_.uniform_cells;
    std::vector<double> out;
    if (std::isfinite(end)) {
      const double dist = std::fabs(end - a);
      const double h = dist / static_cast<double>(n);
      for (std::size_t k = 1; k < n; ++k) out.push_back(a + dir * h * static_cast<double>(k));
      const double floor = std::max(std::fabs(end) * 4e-16, 1e-300);
      for (double d = 0.5 * h; d > floor; d *= 0.5) {
        const double x = end - dir * d;
        if (!((x - out.back()) * dir > 0.0) || x == end) break;
        out.push_back(x);
      }
    } else {
      const double reach = layout_.uniform_extent * layout_.scale;
      const double h = reach / static_cast<double>(n);
      for (std::size_t k = 1; k <= n; ++k) out.push_back(a + dir * h * static_cast<double>(k));
      double d = reach;
      while (d < layout_.far_limit * std::max(1.0, layout_.scale)) {
        d *= layout_.growth;
        out.push_back(a + dir * d);
      }
    }
    return out;
  }

  void build() {
    if (!(layout_.anchor > layout_.lower && layout_.anchor < layout_.upper)) {
      throw ParameterError("antiderivative anchor must lie inside the interval");
    }
    const auto right = side_nodes(+1);
    const auto left = side_nodes(-1);
    std::vector<double> rv, lv;
    accumulate(right, rv);
    accumulate(left, lv);
    nodes_.reserve(rv.size() + lv.size() + 1);
    values_.reserve(rv.size() + lv.size() + 1);
    for (std::size_t i = lv.size(); i-- > 0;) {
      nodes_.push_back(left[i]);
      values_.push_back(lv[i]);
    }
    nodes_.push_back(layout_.anchor);
    values_.push_back(0.0);
    for (std::size_t i = 0; i < rv.size(); ++i) {
      nodes_.push_back(right[i]);
      values_.push_back(rv[i]);
    }
  }

  // Running integral along one side; stops at the first segment that fails.
  void accumulate(const std::vector<double>& pts, std::vector<double>& vals) const {
    double acc = 0.0;
    double from = layout_.anchor;
    for (double x : pts) {
      double step = 0.0;
      try {
        step = piece(from, x, layout_.rel_tol);
      } catch (const Error&) {
        return;
      }
      acc += step;
      if (!std::isfinite(acc) || std::fabs(acc) > 1e300) return;
      vals.push_back(acc);
      from = x;
    }
  }

  Fn f_;
  Layout layout_;
  std::vector<double> nodes_;
  std::vector<double> values_;
};

}  // namespace diffcert
