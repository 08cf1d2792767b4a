#pragma once

// Euler-Maruyama ensembles of the reflected diffusion dX = b dt + sqrt(2a) dW,
// empirical W1 under d_rho, decay fits and bound checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "diffcert/error.hpp"
#include "diffcert/feller.hpp"
#include "diffcert/parallel.hpp"
#include "diffcert/philox.hpp"

namespace diffcert {

enum class Coupling { Synchronous, Independent };

inline const char* to_string(Coupling c) { return c == Coupling::Synchronous ? "synchronous" : "independent"; }

struct SimConfig {
  DiffusionSpec spec;
  double x_init = 1.0;
  double y_init = 0.0;
  std::size_t n_paths = 10000;
  double dt = 1e-3;
  std::vector<double> t_grid;
  std::uint64_t seed = 1;
  Coupling coupling = Coupling::Synchronous;
  double guard_eps = std::numeric_limits<double>::quiet_NaN();  // NaN: 1e-6 * interval scale
  unsigned threads = 0;
};

inline std::vector<double> uniform_grid(double t_max, double t_step) {
  if (!(t_step > 0.0) || !(t_max >= 0.0)) throw ParameterError("time grid needs t_step > 0 and t_max >= 0");
  std::vector<double> g;
  const auto n = static_cast<std::size_t>(std::floor(t_max / t_step + 1e-9));
  for (std::size_t k = 0; k <= n; ++k) g.push_back(t_step * static_cast<double>(k));
  return g;
}

inline void validate(const SimConfig& cfg) {
  cfg.spec.interval.validate();
  if (!(cfg.dt > 0.0)) throw ParameterError("dt must be positive");
  if (cfg.t_grid.empty()) throw ParameterError("t_grid is empty");
  if (cfg.t_grid.front() < 0.0) throw ParameterError("t_grid must start at t >= 0");
  for (std::size_t i = 1; i < cfg.t_grid.size(); ++i) {
    if (!(cfg.t_grid[i] > cfg.t_grid[i - 1])) throw ParameterError("t_grid must be strictly increasing");
  }
  if (cfg.x_init == cfg.y_init) throw ParameterError("x_init and y_init must differ");
  if (cfg.n_paths < 100) throw ParameterError("n_paths must be at least 100");
  const Interval& I = cfg.spec.interval;
  if (!I.contains(cfg.x_init) || !I.contains(cfg.y_init)) throw ParameterError("initial points must lie in the interval");
}

struct Ensemble {
  std::vector<double> t;
  std::vector<std::vector<double>> x;  // x[k][i]: path i at t[k], started from x_init
  std::vector<std::vector<double>> y;
  std::uint64_t guard_hits = 0;
  std::uint64_t steps = 0;
  double guard_rate() const { return steps == 0 ? 0.0 : static_cast<double>(guard_hits) / static_cast<double>(steps); }
  std::vector<std::string> warnings;
};

namespace detail {

/// Mirror reflection at closed ends (folding on a bounded interval), the same
/// mirror at open ends followed by clamping to the eps-guard.
class Boundary {
 public:
  Boundary(const Interval& I, double eps) : I_(I), eps_(eps) {}

  double apply(double x, std::uint64_t& hits) const {
    const bool lo = I_.lower_finite(), hi = I_.upper_finite();
    if (lo && hi) {
      if (x < I_.lower || x > I_.upper) {
        const double w = I_.upper - I_.lower;
        double r = std::fmod(x - I_.lower, 2.0 * w);
        if (r < 0.0) r += 2.0 * w;
        if (r > w) r = 2.0 * w - r;
        x = I_.lower + r;
      }
    } else if (lo && x < I_.lower) {
      x = 2.0 * I_.lower - x;
    } else if (hi && x > I_.upper) {
      x = 2.0 * I_.upper - x;
    }
    if (lo && !I_.lower_closed && x < I_.lower + eps_) {
      x = I_.lower + eps_;
      ++hits;
    }
    if (hi && !I_.upper_closed && x > I_.upper - eps_) {
      x = I_.upper - eps_;
      ++hits;
    }
    return x;
  }

 private:
  Interval I_;
  double eps_;
};

inline double diffusion_step(const DiffusionSpec& s, double x, double dt, double z) {
  const double a = s.a(x);
  if (a < 0.0) throw EvalError("a", x, "diffusion coefficient is negative");
  return x + s.b(x) * dt + std::sqrt(2.0 * a * dt) * z;
}

}  // namespace detail

/// Two ensembles, from x_init and y_init, recorded at every grid time.  Path
/// i at step k draws its normals from Philox block (counter = (k, i),
/// key = seed), so the result does not depend on the thread count.
inline Ensemble simulate_ensemble(const SimConfig& cfg) {
  validate(cfg);
  const Interval& I = cfg.spec.interval;
  const double eps = std::isnan(cfg.guard_eps) ? 1e-6 * I.scale() : cfg.guard_eps;
  const detail::Boundary wall(I, eps);
  const NormalStream stream(cfg.seed);
  const std::size_t n = cfg.n_paths, rows = cfg.t_grid.size();

  std::vector<std::uint64_t> stop(rows);
  for (std::size_t k = 0; k < rows; ++k) stop[k] = static_cast<std::uint64_t>(std::llround(cfg.t_grid[k] / cfg.dt));

  Ensemble out;
  out.t = cfg.t_grid;
  out.x.assign(rows, std::vector<double>(n));
  out.y.assign(rows, std::vector<double>(n));
  std::vector<std::uint64_t> hits(n, 0);

  parallel_for(
      n,
      [&](std::size_t i) {
        double x = cfg.x_init, y = cfg.y_init;
        std::uint64_t step = 0, h = 0;
        for (std::size_t k = 0; k < rows; ++k) {
          for (; step < stop[k]; ++step) {
            const auto [z1, z2] = stream.pair(step, i);
            x = wall.apply(detail::diffusion_step(cfg.spec, x, cfg.dt, z1), h);
            y = wall.apply(detail::diffusion_step(cfg.spec, y, cfg.dt, cfg.coupling == Coupling::Synchronous ? z1 : z2),
                           h);
          }
          out.x[k][i] = x;
          out.y[k][i] = y;
        }
        hits[i] = h;
      },
      cfg.threads);

  out.guard_hits = std::accumulate(hits.begin(), hits.end(), std::uint64_t{0});
  out.steps = 2 * static_cast<std::uint64_t>(n) * (rows ? stop.back() : 0);
  if (out.guard_rate() > 0.01) {
    out.warnings.push_back("eps-guard clamped " + std::to_string(100.0 * out.guard_rate()) +
                           "% of steps; boundary bias likely");
  }
  return out;
}

// ---------------------------------------------------------------------------

struct W1Estimate {
  double w1 = 0.0;
  double std_err = 0.0;
};

namespace detail {

// W1 between two weighted samples, each given as values in ascending order
// with integer multiplicities of equal total: quantile coupling by merging.
inline double weighted_sorted_w1(const std::vector<double>& a, const std::vector<std::uint32_t>& wa,
                                 const std::vector<double>& b, const std::vector<std::uint32_t>& wb) {
  std::size_t i = 0, j = 0;
  std::uint64_t ra = 0, rb = 0, total = 0;
  double acc = 0.0;
  while (true) {
    while (i < a.size() && ra == 0) ra = wa[i++];
    while (j < b.size() && rb == 0) rb = wb[j++];
    if (ra == 0 || rb == 0) break;
    const std::uint64_t m = std::min(ra, rb);
    acc += static_cast<double>(m) * std::fabs(a[i - 1] - b[j - 1]);
    total += m;
    ra -= m;
    rb -= m;
  }
  return total ? acc / static_cast<double>(total) : 0.0;
}

}  // namespace detail

/// W1 of the empirical laws of rho(A) and rho(B): mean gap of sorted images.
/// std_err from `resamples` paired bootstrap draws (index i resamples A_i and
/// B_i together, preserving any path coupling).
template <class Rho>
W1Estimate w1_empirical(const std::vector<double>& A, const std::vector<double>& B, Rho&& rho,
                        std::size_t resamples = 200, std::uint64_t seed = 0x5eed) {
  if (A.size() != B.size()) throw ParameterError("w1_empirical needs equal-length samples");
  const std::size_t n = A.size();
  W1Estimate out;
  if (n == 0) return out;
  std::vector<double> ra(n), rb(n);
  for (std::size_t i = 0; i < n; ++i) {
    ra[i] = rho(A[i]);
    rb[i] = rho(B[i]);
  }
  std::vector<std::size_t> oa(n), ob(n);
  std::iota(oa.begin(), oa.end(), 0);
  std::iota(ob.begin(), ob.end(), 0);
  std::stable_sort(oa.begin(), oa.end(), [&](std::size_t p, std::size_t q) { return ra[p] < ra[q]; });
  std::stable_sort(ob.begin(), ob.end(), [&](std::size_t p, std::size_t q) { return rb[p] < rb[q]; });
  std::vector<double> sa(n), sb(n);
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sa[k] = ra[oa[k]];
    sb[k] = rb[ob[k]];
    acc += std::fabs(sa[k] - sb[k]);
  }
  out.w1 = acc / static_cast<double>(n);
  if (resamples < 2 || n < 2) return out;

  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::uint32_t> count(n), wa(n), wb(n);
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t r = 0; r < resamples; ++r) {
    std::fill(count.begin(), count.end(), 0u);
    for (std::size_t k = 0; k < n; ++k) ++count[pick(gen)];
    for (std::size_t k = 0; k < n; ++k) {
      wa[k] = count[oa[k]];
      wb[k] = count[ob[k]];
    }
    const double v = detail::weighted_sorted_w1(sa, wa, sb, wb);
    s1 += v;
    s2 += v * v;
  }
  const double m = s1 / static_cast<double>(resamples);
  out.std_err = std::sqrt(std::max(0.0, (s2 - s1 * m) / static_cast<double>(resamples - 1)));
  return out;
}

inline W1Estimate w1_empirical(const std::vector<double>& A, const std::vector<double>& B, const MetricSpec& rho,
                               std::size_t resamples = 200, std::uint64_t seed = 0x5eed) {
  return w1_empirical(A, B, [&](double x) { return rho(x); }, resamples, seed);
}

/// Mean pathwise distance (1/n) sum |rho(A_i) - rho(B_i)| of the simulated
/// coupling, an upper estimate of W1, with its standard error.
template <class Rho>
W1Estimate coupling_distance(const std::vector<double>& A, const std::vector<double>& B, Rho&& rho) {
  if (A.size() != B.size()) throw ParameterError("coupling_distance needs equal-length samples");
  const std::size_t n = A.size();
  W1Estimate out;
  if (n == 0) return out;
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::fabs(rho(A[i]) - rho(B[i]));
    s1 += d;
    s2 += d * d;
  }
  out.w1 = s1 / static_cast<double>(n);
  if (n > 1) {
    const double var = std::max(0.0, (s2 - s1 * out.w1) / static_cast<double>(n - 1));
    out.std_err = std::sqrt(var / static_cast<double>(n));
  }
  return out;
}

// ---------------------------------------------------------------------------

struct DecayRow {
  double t = 0.0;
  double w1 = 0.0;
  double std_err = 0.0;
  double coupling = 0.0;  // mean pathwise distance
};

struct DecayFit {
  double delta = 0.0;
  double log_k = 0.0;
  std::size_t rows_used = 0;
};

/// OLS of log w1 on t over rows with w1 > 3 std_err.
inline DecayFit fit_decay(const std::vector<DecayRow>& rows) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rows) {
    if (r.w1 > 3.0 * r.std_err && r.w1 > 0.0) pts.emplace_back(r.t, std::log(r.w1));
  }
  if (pts.size() < 4) {
    throw FitError("only " + std::to_string(pts.size()) +
                   " rows above the noise floor w1 > 3 std_err; at least 4 are needed");
  }
  const double n = static_cast<double>(pts.size());
  double st = 0, sl = 0;
  for (auto [t, l] : pts) {
    st += t;
    sl += l;
  }
  const double mt = st / n, ml = sl / n;
  double stt = 0, stl = 0;
  for (auto [t, l] : pts) {
    stt += (t - mt) * (t - mt);
    stl += (t - mt) * (l - ml);
  }
  if (!(stt > 0.0)) throw FitError("rows above the noise floor share one time");
  const double slope = stl / stt;
  return {-slope, ml - slope * mt, pts.size()};
}

struct BoundReport {
  bool bound_ok = true;
  std::vector<double> violations;
  double worst_margin = -std::numeric_limits<double>::infinity();  // max of w1 - bound - 3 std_err
};

/// w1 <= d0 K exp(-delta t) + 3 std_err at every row, up to a relative
/// rounding allowance of 1e-9 d0 K (w1 at t = 0 is d0 recomputed as a mean).
inline BoundReport verify_bound(const std::vector<DecayRow>& rows, double delta, double K, double d0) {
  BoundReport rep;
  for (const auto& r : rows) {
    const double margin = r.w1 - (d0 * K * (std::exp(-delta * r.t) + 1e-9) + 3.0 * r.std_err);
    rep.worst_margin = std::max(rep.worst_margin, margin);
    if (margin > 0.0) {
      rep.bound_ok = false;
      rep.violations.push_back(r.t);
    }
  }
  return rep;
}

/// Decay rows of an ensemble under the metric rho.
template <class Rho>
std::vector<DecayRow> decay_rows(const Ensemble& ens, Rho&& rho, std::size_t resamples = 200, std::uint64_t seed = 0x5eed) {
  std::vector<DecayRow> rows(ens.t.size());
  for (std::size_t k = 0; k < ens.t.size(); ++k) {
    const auto w = w1_empirical(ens.x[k], ens.y[k], rho, resamples, seed + k);
    rows[k] = {ens.t[k], w.w1, w.std_err, coupling_distance(ens.x[k], ens.y[k], rho).w1};
  }
  return rows;
}

}  // namespace diffcert
