#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "diffcert/diffcert.hpp"
#include "properties.hpp"

using namespace diffcert;

namespace {

constexpr double kPi = std::numbers::pi;

Analysis analysis_of(const std::string& name, const CatalogParams& p = {}) {
  const CatalogEntry m = make_catalog_entry(name, p);
  return Analysis(m.spec, m.metric);
}

}  // namespace

TEST(ScaleSpeed, OuNormalizingConstantAndMean) {
  const Analysis an = analysis_of("ou");
  EXPECT_NEAR(an.scale_speed().m_total(), std::sqrt(2 * kPi), 1e-8);
  EXPECT_NEAR(an.scale_speed().mean_rho(), 0.0, 1e-10);
  EXPECT_NEAR(an.scale_speed().density(0.7), std::exp(-0.245) / std::sqrt(2 * kPi), 1e-10);
}

TEST(ScaleSpeed, BesselInvariantLaw) {
  for (double beta : {2.0, 3.0, 5.0}) {
    const Analysis an = analysis_of("bessel", {{"beta", beta}});
    EXPECT_NEAR(an.scale_speed().mean_rho(), beta / (beta + 1), 1e-8);
    EXPECT_NEAR(an.scale_speed().density(0.4), beta * std::pow(0.4, beta - 1), 1e-8);
  }
}

TEST(ScaleSpeed, UIsPositiveInTheInterior) {
  for (const auto& name : catalog_names()) {
    const CatalogEntry m = make_catalog_entry(name);
    const Analysis an(m.spec, m.metric);
    for (const auto& r : an.u_table(21)) EXPECT_GT(r.u, 0.0) << name << " at x = " << r.x;
  }
}

TEST(Cw, OrnsteinUhlenbeck) {
  const Analysis an = analysis_of("ou");
  EXPECT_EQ(an.cw().status, CwStatus::Finite);
  EXPECT_NEAR(an.cw().c_w, 1.0, 1e-6);
  for (int i = 0; i <= 100; ++i) {
    const double x = -4.0 + 0.08 * i;
    EXPECT_NEAR(an.scale_speed().u(x, 1e-9), 1.0, 1e-6) << "x = " << x;
  }
}

TEST(Cw, JacobiClosedForm) {
  const Analysis an = analysis_of("jacobi");
  EXPECT_NEAR(an.cw().c_w, kPi * kPi / 8, 1e-4);
  for (double x : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const double as = std::asin(2 * x - 1);
    EXPECT_NEAR(an.scale_speed().u_ratio(x, 1e-9), kPi * kPi / 8 - 0.5 * as * as, 1e-4) << "x = " << x;
  }
}

TEST(Cw, BranchingApproachesOneAtInfinity) {
  const Analysis an = analysis_of("branching");
  EXPECT_NEAR(an.cw().c_w, 1.0, 1e-3);
  EXPECT_LE(an.cw().c_w, 1.0);
  EXPECT_TRUE(an.cw().boundary_flag);
  // u / rho' = 1 - e^x erfc(sqrt x) for rho = sqrt(2x): increasing, not constant.
  for (double x : {0.5, 1.0, 2.0, 4.0}) {
    EXPECT_NEAR(an.scale_speed().u_ratio(x, 1e-10), 1 - std::exp(x) * std::erfc(std::sqrt(x)), 1e-9) << x;
  }
}

TEST(Cw, BesselFamily) {
  for (double beta : {2.0, 3.0, 5.0}) {
    const Analysis an = analysis_of("bessel", {{"beta", beta}});
    EXPECT_NEAR(an.cw().c_w, 1 / (2 * (beta + 1)), 1e-6);
    EXPECT_NEAR(an.cw().arg, 0.5, 1e-4);
    for (double x : {0.1, 0.35, 0.8, 0.99}) {
      EXPECT_NEAR(an.scale_speed().u(x, 1e-10), 2 * (x - x * x) / (beta + 1), 1e-8) << "beta " << beta << " x " << x;
    }
  }
}

TEST(Cw, PowerPotentialThreshold) {
  const Analysis r2 = analysis_of("power-potential", {{"r", 2.0}});
  const Analysis r3 = analysis_of("power-potential", {{"r", 3.0}});
  EXPECT_EQ(r2.cw().status, CwStatus::Finite);
  EXPECT_NEAR(r2.cw().c_w, 0.5, 1e-8);
  EXPECT_EQ(r3.cw().status, CwStatus::Finite);
  EXPECT_TRUE(std::isfinite(r3.cw().c_w));

  const Analysis r15 = analysis_of("power-potential", {{"r", 1.5}});
  EXPECT_EQ(r15.cw().status, CwStatus::UnboundedSuspected);
  const auto& h = r15.cw().history;
  ASSERT_GE(h.size(), 4u);  // initial scan plus three widenings
  for (std::size_t i = h.size() - 3; i < h.size(); ++i) {
    EXPECT_GT(h[i].sup, h[i - 1].sup);
    EXPECT_TRUE(h[i].boundary_flag);
  }
}

TEST(Cw, BoundedDiffusionCoefficientKeepsHalf) {
  // With V = x^2, u = 1/2 whatever a is.
  const Analysis an = analysis_of("power-potential", {{"r", 2.0}, {"kappa", 0.5}});
  EXPECT_NEAR(an.cw().c_w, 0.5, 1e-7);
}

TEST(Cw, MetricAffineInvariance) {
  const auto out = proptest::metric_affine_invariance();
  EXPECT_TRUE(out.ok) << out.detail;
}

TEST(Cw, BasePointInvariance) {
  for (const auto& [name, c] : std::vector<std::pair<std::string, double>>{{"ou", 1.3}, {"bessel", 0.8}, {"jacobi", 0.3}}) {
    CatalogEntry m = make_catalog_entry(name);
    const double c1 = Analysis(m.spec, m.metric).cw().c_w;
    m.spec.base_point = c;
    const Analysis moved(m.spec, m.metric);
    EXPECT_NEAR(moved.scale_speed().base_point(), c, 0.0);
    EXPECT_NEAR(moved.cw().c_w, c1, 1e-8 * c1) << name;
  }
}

TEST(Cw, WeakSolutionResidual) {
  const Analysis ou = analysis_of("ou");
  const Analysis be = analysis_of("bessel");
  for (int i = 0; i <= 40; ++i) {
    EXPECT_LE(proptest::weak_residual(ou, -4.0 + 0.2 * i, 1e-2), 1e-3);
    EXPECT_LE(proptest::weak_residual(be, 0.05 + 0.0225 * i, 1e-3), 1e-3);
  }
}

TEST(Hypotheses, OuAllPass) {
  const Analysis an = analysis_of("ou");
  EXPECT_TRUE(an.hypotheses().all_pass());
  EXPECT_EQ(an.hypotheses().h2.size(), 2u);
}

TEST(Hypotheses, ClosedEndpointsSkipBoundaryTests) {
  const Analysis an = analysis_of("jacobi");
  EXPECT_TRUE(an.hypotheses().h2.empty());
  EXPECT_EQ(an.hypotheses().h1, Verdict::Pass);
}

TEST(Hypotheses, StrictModeRejectsFailures) {
  const CatalogEntry m = make_catalog_entry("bessel");
  AnalysisOptions opt;
  const Analysis relaxed(m.spec, m.metric, opt);
  if (relaxed.hypotheses().any_fail()) {
    opt.enforce_hypotheses = true;
    EXPECT_THROW(Analysis(m.spec, m.metric, opt), NoCertificateError);
  } else {
    GTEST_SKIP() << "all hypotheses pass for this entry";
  }
}

TEST(Hypotheses, DegenerateDiffusionRejected) {
  const DiffusionSpec negative{Interval{}, parse("x^2-1"), parse("-x"), {}};
  EXPECT_THROW(Analysis(negative, MetricSpec(parse("x"))), EllipticityError);
  // A single zero of a between probe points surfaces once b/a blows up.
  const DiffusionSpec pinched{Interval{}, parse("x^2"), parse("-x"), {}};
  EXPECT_THROW(Analysis(pinched, MetricSpec(parse("x"))), Error);
}

TEST(ConditionC, OuWithConstantPhi) {
  const Analysis an = analysis_of("ou");
  const ConditionC c = an.condition_C(parse("1"));
  EXPECT_NEAR(c.C, 1.0, 1e-12);
  EXPECT_TRUE(c.lower_ok);
  EXPECT_EQ(c.M, 0.0);
}

TEST(ConditionC, SinusoidalDriftHasPositiveM) {
  const Analysis an = analysis_of("sinusoidal-drift");
  const ConditionC c = an.condition_C(parse("1"));
  EXPECT_GT(c.M, 1.0);
  EXPECT_THROW(an.certify(parse("1"), 1.0 / c.M), ParameterError);
  EXPECT_THROW(an.certify(parse("1"), -0.1), ParameterError);
}

TEST(ConditionC, PhiBelowRhoPrimeFails) {
  const Analysis an = analysis_of("ou");
  const ConditionC c = an.condition_C(parse("0.5"));
  EXPECT_FALSE(c.lower_ok);
  EXPECT_THROW(an.certify(parse("0.5"), 0.1), NoCertificateError);
}

TEST(ConditionC, SinusoidalPotentialBridgeIsAdmissible) {
  for (double n : {2.0, 3.0}) {
    const CatalogEntry m = make_catalog_entry("sinusoidal-potential", {{"n", n}});
    const Analysis an(m.spec, m.metric);
    const ConditionC c = an.condition_C(*m.phi);
    EXPECT_TRUE(c.lower_ok) << "n = " << n;
    EXPECT_TRUE(std::isfinite(c.C));
    EXPECT_TRUE(std::isfinite(c.M));
  }
}

TEST(Certificate, PartBIsInverseCw) {
  for (const auto& name : {"ou", "jacobi", "branching", "bessel", "sinusoidal-drift"}) {
    const Analysis an = analysis_of(name);
    const Certificate c = an.certify();
    EXPECT_EQ(c.mode, CertMode::PartB);
    EXPECT_DOUBLE_EQ(c.delta, 1.0 / an.cw().c_w) << name;
    EXPECT_EQ(c.K, 1.0);
    EXPECT_EQ(c.metric, "rho_tilde");
    EXPECT_DOUBLE_EQ(c.spectral_gap_lower, c.delta);
  }
}

TEST(Certificate, BesselPartAMatchesDefinition) {
  for (double beta : {2.0, 3.0, 5.0}) {
    const CatalogEntry m = make_catalog_entry("bessel", {{"beta", beta}});
    const Analysis an(m.spec, m.metric);
    const Certificate c = an.certify(m.phi, 0.25);
    const double k = 2 * (beta + 1), cw = 1 / k;
    EXPECT_NEAR(c.delta, k / (0.25 * k + 1), 1e-6);
    // K = (1/alpha) sup (u + alpha)/1 = (c_w + alpha)/alpha.
    EXPECT_NEAR(c.K, (cw + 0.25) / 0.25, 1e-6);
  }
}

TEST(Certificate, UnboundedCwHasNoCertificate) {
  const Analysis an = analysis_of("power-potential", {{"r", 1.5}});
  EXPECT_THROW(an.certify(), NoCertificateError);
}

TEST(Certificate, DefaultAlphaRespectsKCap) {
  const CatalogEntry m = make_catalog_entry("ou");
  const Analysis an(m.spec, m.metric);
  const Certificate c = an.certify(m.phi);
  EXPECT_LE(c.K, an.options().k_cap);
  EXPECT_GT(c.alpha, 0.0);
}

TEST(Certificate, DeltaBelowInverseCwEverywhere) {
  const auto out = proptest::part_a_below_inverse_cw();
  EXPECT_TRUE(out.ok) << out.detail;
  EXPECT_GT(out.checked, 20u);
}

TEST(Sweep, MonotoneAndBelowLimit) {
  const CatalogEntry m = make_catalog_entry("jacobi");
  const Analysis an(m.spec, m.metric);
  const auto rows = an.alpha_sweep(*m.phi, 24);
  ASSERT_EQ(rows.size(), 24u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_GT(rows[i].alpha, rows[i - 1].alpha);
    EXPECT_LE(rows[i].delta, rows[i - 1].delta * (1 + 1e-12));
    EXPECT_LE(rows[i].K, rows[i - 1].K * (1 + 1e-9));
  }
  EXPECT_NEAR(rows.front().delta, 1 / an.cw().c_w, 0.01 / an.cw().c_w);
}

TEST(TildeMetric, DerivativeIsUAndOriginAtBasePoint) {
  for (const auto& name : {"ou", "bessel", "jacobi"}) {
    const Analysis an = analysis_of(name);
    const TildeMetric t = tilde_metric(an);
    const double c = an.scale_speed().base_point();
    EXPECT_NEAR(t(c), 0.0, 1e-12) << name;
    const auto [lo, hi] = t.range();
    double prev = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 50; ++i) {
      const double x = lo + (hi - lo) * i / 50.0;
      const double v = t(x);
      EXPECT_GT(v, prev) << name;
      prev = v;
    }
    const double x0 = lo + 0.3 * (hi - lo), x1 = lo + 0.6 * (hi - lo);
    const double direct = integrate([&](double y) { return an.scale_speed().u(y, 1e-11); }, x0, x1, 1e-10).value;
    EXPECT_NEAR(t(x1) - t(x0), direct, 1e-8 * std::fabs(direct)) << name;
  }
}

TEST(TildeMetric, ExtendsBeyondTheTable) {
  const Analysis an = analysis_of("ou");
  const TildeMetric t = tilde_metric(an);
  const double far = t.range().second + 3.0;
  EXPECT_NEAR(t(far) - t(t.range().second), 3.0, 1e-6);  // u = 1
}

TEST(Catalog, EveryEntryBuildsAndMeetsItsConstants) {
  for (const auto& name : catalog_names()) {
    const CatalogEntry m = make_catalog_entry(name);
    EXPECT_EQ(m.name, name);
    EXPECT_TRUE(m.spec.interval.contains(m.x_init));
    EXPECT_TRUE(m.spec.interval.contains(m.y_init));
    const Analysis an(m.spec, m.metric);
    EXPECT_EQ(std::string(to_string(an.cw().status)), m.cw_status) << name;
  }
}

TEST(Catalog, RejectsUnknownNamesAndParameters) {
  EXPECT_THROW(make_catalog_entry("nope"), ParameterError);
  EXPECT_THROW(make_catalog_entry("ou", {{"beta", 2.0}}), ParameterError);
  EXPECT_THROW(make_catalog_entry("bessel", {{"beta", 0.5}}), ParameterError);
  EXPECT_THROW(make_catalog_entry("sinusoidal-potential", {{"n", 1.0}}), ParameterError);
}
