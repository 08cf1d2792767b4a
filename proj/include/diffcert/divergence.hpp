#pragma once

// Numerical test for divergence of an improper integral of a non-negative
// integrand.  Partial integrals are taken from a fixed base point out to a
// sequence of cutoffs approaching the improper endpoint.
//
//   diverges     partials strictly increasing over >= 4 cutoffs, and either the
//                last partial exceeds `threshold` (or overflowed) or the last
//                three increment ratios are all >= `growth_ratio`
//   converges    the last two partials agree within `agree_tol`, or the last
//                three increment ratios all lie in [0, decay_ratio]
//   inconclusive anything else (slow or erratic growth)

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "diffcert/error.hpp"
#include "diffcert/quadrature.hpp"

namespace diffcert {

enum class Divergence { Diverges, Converges, Inconclusive };

inline const char* to_string(Divergence d) {
  switch (d) {
    case Divergence::Diverges: return "diverges";
    case Divergence::Converges: return "converges";
    default: return "inconclusive";
  }
}

struct DivergenceOptions {
  double threshold = 1e6;
  double growth_ratio = 0.95;
  double decay_ratio = 0.9;
  double agree_tol = 1e-6;
  double rel_tol = 1e-8;
};

struct DivergenceVerdict {
  Divergence verdict = Divergence::Inconclusive;
  std::vector<std::pair<double, double>> trace;  // (cutoff, partial integral)
  double extrapolated = std::numeric_limits<double>::quiet_NaN();
  bool overflow = false;
};

// Index of the first increment entering the ratio tests (up to three ratios).
inline std::size_t first_ratio(std::size_t increments) { return increments >= 4 ? increments - 3 : 1; }

inline Divergence classify_partials(const std::vector<std::pair<double, double>>& trace,
                                    const DivergenceOptions& opt, double* extrapolated = nullptr) {
  const std::size_t n = trace.size();
  if (n < 2) return Divergence::Inconclusive;
  std::vector<double> d(n - 1);
  bool monotone = true;
  for (std::size_t k = 1; k < n; ++k) {
    d[k - 1] = trace[k].second - trace[k - 1].second;
    if (!(d[k - 1] > 0.0)) monotone = false;
  }
  const double last = trace.back().second;
  if (monotone && n >= 4) {
    if (!(last <= opt.threshold)) return Divergence::Diverges;
    if (d.size() >= 3) {
      bool growing = true;
      for (std::size_t k = first_ratio(d.size()); k < d.size(); ++k)
        if (!(d[k] >= opt.growth_ratio * d[k - 1])) growing = false;
      if (growing) return Divergence::Diverges;
    }
  }
  if (!std::isfinite(last)) return Divergence::Inconclusive;
  if (std::fabs(d.back()) <= opt.agree_tol * std::fabs(last)) {
    if (extrapolated) *extrapolated = last;
    return Divergence::Converges;
  }
  if (d.size() >= 3) {
    bool decaying = true;
    double r = 0.0;
    for (std::size_t k = first_ratio(d.size()); k < d.size(); ++k) {
      r = d[k - 1] != 0.0 ? d[k] / d[k - 1] : 1.0;
      if (!(r >= 0.0 && r <= opt.decay_ratio)) decaying = false;
    }
    if (decaying) {
      if (extrapolated) *extrapolated = last + d.back() * r / (1.0 - r);
      return Divergence::Converges;
    }
  }
  return Divergence::Inconclusive;
}

/// Partial integrals of f from `base` out to each cutoff in turn.  `cutoffs`
/// must be strictly monotone, all on the same side of `base`, with at least
/// four entries.
template <class F>
DivergenceVerdict detect_divergence(F&& f, double base, std::span<const double> cutoffs,
                                    const DivergenceOptions& opt = {}) {
  if (cutoffs.size() < 4) throw ParameterError("detect_divergence needs at least four cutoffs");
  const double dir = cutoffs[0] > base ? 1.0 : -1.0;
  for (std::size_t k = 0; k < cutoffs.size(); ++k) {
    const double prev = k == 0 ? base : cutoffs[k - 1];
    if (!((cutoffs[k] - prev) * dir > 0.0)) throw ParameterError("cutoffs must be strictly monotone away from the base");
  }
  DivergenceVerdict out;
  QuadOptions qo;
  qo.abs_tol = 1e-300;
  double partial = 0.0;
  double from = base;
  for (double cut : cutoffs) {
    try {
      const double lo = std::min(from, cut), hi = std::max(from, cut);
      partial += integrate(f, lo, hi, opt.rel_tol, qo).value;
      if (!std::isfinite(partial)) throw OverflowError("partial integral overflowed");
    } catch (const OverflowError&) {
      out.overflow = true;
      out.trace.emplace_back(cut, std::numeric_limits<double>::infinity());
      break;
    } catch (const QuadratureError& e) {
      partial += e.best_estimate();
      if (!std::isfinite(partial)) {
        out.overflow = true;
        out.trace.emplace_back(cut, std::numeric_limits<double>::infinity());
        break;
      }
    }
    out.trace.emplace_back(cut, partial);
    from = cut;
  }
  out.verdict = classify_partials(out.trace, opt, &out.extrapolated);
  return out;
}

}  // namespace diffcert
