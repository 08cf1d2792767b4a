#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "diffcert/diffcert.hpp"
#include "properties.hpp"

using namespace diffcert;

TEST(Philox, KnownAnswerVectors) {
  using C = Philox4x32::Counter;
  EXPECT_EQ(Philox4x32::block({0, 0, 0, 0}, {0, 0}), (C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(Philox4x32::block({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u}),
            (C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(NormalStream, UnitIntervalExcludesZero) {
  EXPECT_EQ(NormalStream::to_unit(0, 0), 0x1.0p-53);
  EXPECT_EQ(NormalStream::to_unit(~0u, ~0u), 1.0);
}

TEST(NormalStream, MomentsAndIndependence) {
  const NormalStream s(2024);
  const int n = 100000;
  double m1 = 0, m2 = 0, m12 = 0, lag = 0, prev = 0;
  for (int i = 0; i < n; ++i) {
    const auto [z1, z2] = s.pair(static_cast<std::uint64_t>(i % 1000), static_cast<std::uint64_t>(i / 1000));
    m1 += z1 + z2;
    m2 += z1 * z1 + z2 * z2;
    m12 += z1 * z2;
    lag += z1 * prev;
    prev = z1;
  }
  const double N = 2.0 * n;
  EXPECT_NEAR(m1 / N, 0.0, 0.01);
  EXPECT_NEAR(m2 / N, 1.0, 0.015);
  EXPECT_NEAR(m12 / n, 0.0, 0.015);
  EXPECT_NEAR(lag / n, 0.0, 0.015);
}

TEST(NormalStream, AddressedBySeedStepAndPath) {
  const NormalStream a(7), b(7), c(8);
  EXPECT_EQ(a.pair(3, 9), b.pair(3, 9));
  EXPECT_NE(a.pair(3, 9), c.pair(3, 9));
  EXPECT_NE(a.pair(3, 9), a.pair(9, 3));
  EXPECT_NE(a.pair(1ull << 32, 0), a.pair(0, 0));
}

TEST(Simulate, DeterministicAcrossRunsAndThreads) {
  const auto out = proptest::simulator_determinism();
  EXPECT_TRUE(out.ok) << out.detail;
}

TEST(Simulate, SynchronousOuDifferenceIsDeterministic) {
  SimConfig cfg = proptest::small_ou_config(200);
  cfg.dt = 1e-3;
  const Ensemble e = simulate_ensemble(cfg);
  for (std::size_t k = 0; k < e.t.size(); ++k) {
    const double expect = std::pow(1.0 - cfg.dt, std::round(e.t[k] / cfg.dt));
    for (std::size_t i = 0; i < cfg.n_paths; ++i) {
      EXPECT_NEAR(e.x[k][i] - e.y[k][i], expect, 1e-12) << "t = " << e.t[k];
    }
  }
}

TEST(Simulate, IndependentCouplingUsesOtherNoise) {
  SimConfig cfg = proptest::small_ou_config(200);
  cfg.coupling = Coupling::Independent;
  const Ensemble e = simulate_ensemble(cfg);
  const auto& last = e.t.size() - 1;
  double spread = 0;
  for (std::size_t i = 0; i < cfg.n_paths; ++i) spread += std::fabs(e.x[last][i] - e.y[last][i]);
  EXPECT_GT(spread / cfg.n_paths, 0.5);
  // The first copy does not depend on the coupling.
  SimConfig sync = cfg;
  sync.coupling = Coupling::Synchronous;
  EXPECT_EQ(simulate_ensemble(sync).x, e.x);
}

TEST(Simulate, ReflectedBrownianMotionBecomesUniform) {
  SimConfig cfg;
  cfg.spec = {Interval{0.0, 1.0, true, true}, parse("0.5"), parse("0"), {}};
  cfg.x_init = 0.1;
  cfg.y_init = 0.9;
  cfg.n_paths = 4000;
  cfg.dt = 1e-3;
  cfg.t_grid = {2.0};
  cfg.seed = 5;
  const Ensemble e = simulate_ensemble(cfg);
  for (const auto* sample : {&e.x[0], &e.y[0]}) {
    std::vector<double> s = *sample;
    std::sort(s.begin(), s.end());
    double d = 0;
    const double n = static_cast<double>(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      d = std::max({d, std::fabs((i + 1) / n - s[i]), std::fabs(s[i] - i / n)});
    }
    EXPECT_LT(d, 1.63 / std::sqrt(n));  // Kolmogorov-Smirnov at the 1% level
    EXPECT_GE(s.front(), 0.0);
    EXPECT_LE(s.back(), 1.0);
  }
}

TEST(Simulate, OpenEndpointStaysInside) {
  const CatalogEntry m = make_catalog_entry("bessel");
  SimConfig cfg = proptest::small_ou_config(1000);
  cfg.spec = m.spec;
  cfg.x_init = 0.01;
  cfg.y_init = 0.9;
  cfg.dt = 1e-3;
  const Ensemble e = simulate_ensemble(cfg);
  for (const auto& row : e.x) {
    for (double v : row) {
      EXPECT_GT(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_LE(e.guard_hits, e.steps);
}

TEST(Simulate, OuInvariantMoments) {
  SimConfig cfg = proptest::small_ou_config(10000);
  cfg.t_grid = {6.0};
  const Ensemble e = simulate_ensemble(cfg);
  double m = 0, v = 0;
  for (double x : e.x[0]) m += x;
  m /= e.x[0].size();
  for (double x : e.x[0]) v += (x - m) * (x - m);
  v /= e.x[0].size() - 1;
  EXPECT_NEAR(m, 0.0, 0.04);
  EXPECT_NEAR(v, 1.0 / (1.0 - cfg.dt / 2), 0.05);  // Euler-Maruyama stationary variance
}

TEST(Simulate, RejectsInvalidConfigurations) {
  SimConfig cfg = proptest::small_ou_config();
  auto bad = [&](auto mutate) {
    SimConfig c = cfg;
    mutate(c);
    EXPECT_THROW(simulate_ensemble(c), ParameterError);
  };
  bad([](SimConfig& c) { c.dt = 0; });
  bad([](SimConfig& c) { c.y_init = c.x_init; });
  bad([](SimConfig& c) { c.n_paths = 10; });
  bad([](SimConfig& c) { c.t_grid = {1.0, 0.5}; });
  bad([](SimConfig& c) { c.t_grid.clear(); });
  bad([](SimConfig& c) {
    c.spec = make_catalog_entry("jacobi").spec;
    c.x_init = 1.5;
  });
}

TEST(UniformGrid, IncludesEndpoint) {
  const auto g = uniform_grid(5.0, 0.25);
  ASSERT_EQ(g.size(), 21u);
  EXPECT_DOUBLE_EQ(g.back(), 5.0);
  EXPECT_THROW(uniform_grid(1.0, 0.0), ParameterError);
}

TEST(W1, MatchesBruteForcePermutations) {
  const auto out = proptest::w1_permutation_equivalence();
  EXPECT_TRUE(out.ok) << out.detail;
}

TEST(W1, MetricAxioms) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  auto rho = [](double x) { return std::atan(x) + x; };
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a(300), b(300), c(300);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = 1 + 0.5 * g(rng);
    for (auto& v : c) v = -1 + 2 * g(rng);
    const double ab = w1_empirical(a, b, rho, 0).w1, ba = w1_empirical(b, a, rho, 0).w1;
    const double bc = w1_empirical(b, c, rho, 0).w1, ac = w1_empirical(a, c, rho, 0).w1;
    EXPECT_NEAR(ab, ba, 1e-14);
    EXPECT_LE(ac, ab + bc + 1e-14);
    EXPECT_EQ(w1_empirical(a, a, rho, 0).w1, 0.0);
  }
}

TEST(W1, TranslationUnderIdentityMetric) {
  std::vector<double> a{0.3, -1.2, 2.5, 0.0}, b;
  for (double v : a) b.push_back(v + 0.75);
  std::shuffle(b.begin(), b.end(), std::mt19937_64(1));
  EXPECT_NEAR(w1_empirical(a, b, [](double x) { return x; }, 0).w1, 0.75, 1e-15);
}

TEST(W1, WeightedMergeEqualsReplicatedSamples) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::uint32_t> w(0, 3);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 12;
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng) + 0.3;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<std::uint32_t> wa(n), wb(n);
    std::uint32_t total = 0;
    for (auto& v : wa) total += (v = w(rng));
    // Same total mass on the other side, placed at random.
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::uint32_t k = 0; k < total; ++k) ++wb[pick(rng)];
    std::vector<double> ea, eb;
    for (std::size_t i = 0; i < n; ++i) {
      ea.insert(ea.end(), wa[i], a[i]);
      eb.insert(eb.end(), wb[i], b[i]);
    }
    const double merged = detail::weighted_sorted_w1(a, wa, b, wb);
    const double expanded = ea.empty() ? 0.0 : w1_empirical(ea, eb, [](double x) { return x; }, 0).w1;
    EXPECT_NEAR(merged, expanded, 1e-13);
  }
}

TEST(W1, BootstrapErrorIsReproducibleAndSized) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  std::vector<double> a(2000), b(2000);
  for (auto& v : a) v = g(rng);
  for (auto& v : b) v = g(rng) + 1.0;
  auto id = [](double x) { return x; };
  const W1Estimate e1 = w1_empirical(a, b, id, 200, 9), e2 = w1_empirical(a, b, id, 200, 9);
  EXPECT_EQ(e1.std_err, e2.std_err);
  EXPECT_NEAR(e1.w1, 1.0, 0.1);
  EXPECT_GT(e1.std_err, 0.005);
  EXPECT_LT(e1.std_err, 0.1);
  EXPECT_THROW(w1_empirical(a, std::vector<double>(3), id), ParameterError);
}

TEST(W1, CouplingDistanceDominates) {
  SimConfig cfg = proptest::small_ou_config(2000);
  cfg.coupling = Coupling::Independent;
  const Ensemble e = simulate_ensemble(cfg);
  auto id = [](double x) { return x; };
  for (std::size_t k = 0; k < e.t.size(); ++k) {
    EXPECT_GE(coupling_distance(e.x[k], e.y[k], id).w1, w1_empirical(e.x[k], e.y[k], id, 0).w1 - 1e-15);
  }
}

TEST(W1, SynchronousOuDecayIsMonotone) {
  SimConfig cfg = proptest::small_ou_config(2000);
  cfg.t_grid = uniform_grid(3.0, 0.25);
  const auto rows = decay_rows(simulate_ensemble(cfg), [](double x) { return x; }, 50);
  for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_LT(rows[k].w1, rows[k - 1].w1);
  EXPECT_NEAR(rows.front().w1, 1.0, 1e-12);
}

TEST(FitDecay, RecoversSyntheticExponential) {
  std::vector<DecayRow> rows;
  for (int k = 0; k <= 10; ++k) {
    const double t = 0.5 * k;
    rows.push_back({t, 2.0 * std::exp(-1.5 * t), 1e-6, 0.0});
  }
  rows.push_back({6.0, 1e-7, 1e-6, 0.0});  // below the noise floor, ignored
  const DecayFit f = fit_decay(rows);
  EXPECT_NEAR(f.delta, 1.5, 1e-10);
  EXPECT_NEAR(f.log_k, std::log(2.0), 1e-10);
  EXPECT_EQ(f.rows_used, 11u);
}

TEST(FitDecay, TooFewRowsAboveNoise) {
  std::vector<DecayRow> rows{{0, 1, 0.01, 0}, {1, 0.5, 0.01, 0}, {2, 0.25, 0.01, 0}, {3, 0.01, 0.01, 0}};
  EXPECT_THROW(fit_decay(rows), FitError);
}

TEST(VerifyBound, PassesAndFails) {
  std::vector<DecayRow> rows{{0.0, 1.0, 0.0, 0}, {1.0, std::exp(-1.0), 0.001, 0}, {2.0, 0.15, 0.01, 0}};
  EXPECT_TRUE(verify_bound(rows, 1.0, 1.0, 1.0).bound_ok);
  const BoundReport r = verify_bound(rows, 2.0, 1.0, 1.0);
  EXPECT_FALSE(r.bound_ok);
  EXPECT_EQ(r.violations, (std::vector<double>{1.0, 2.0}));
  EXPECT_GT(r.worst_margin, 0.0);
  // Within three standard errors counts as holding.
  EXPECT_TRUE(verify_bound({{1.0, 0.395, 0.01, 0}}, 1.0, 1.0, 1.0).bound_ok);
  EXPECT_FALSE(verify_bound({{1.0, 0.41, 0.01, 0}}, 1.0, 1.0, 1.0).bound_ok);
}
