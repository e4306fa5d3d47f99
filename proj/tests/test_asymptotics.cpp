#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "fractal_sl/asymptotics.hpp"
#include "table1.hpp"

using namespace fsl;

namespace {

IndexCurve table1_curve() {
  std::vector<double> mags(std::begin(fixtures::kTable1Lambda), std::end(fixtures::kTable1Lambda));
  return IndexCurve(Side::plus, mags, mags.back());
}

struct Spectra {
  SpectrumReport plus, minus;
};

Spectra spectra(const SimilarityParams& p, int depth, int count) {
  EigenOptions opt;
  opt.depth = depth;
  opt.count = count;
  opt.threads = 2;
  Spectra s;
  s.plus = eigenvalues(p, opt);
  opt.side = Side::minus;
  s.minus = eigenvalues(p, opt);
  return s;
}

ProfileEstimate estimate(const SimilarityParams& p, const Spectra& s, std::size_t q = 100) {
  const auto plus = IndexCurve::from_report(s.plus);
  const auto minus = IndexCurve::from_report(s.minus);
  const auto cplus = IndexCurve::coarse_from_report(s.plus);
  const auto cminus = IndexCurve::coarse_from_report(s.minus);
  EstimateOptions opt;
  opt.q = q;
  opt.coarse_plus = &cplus;
  opt.coarse_minus = &cminus;
  return s_estimate(p, arithmetic_structure(p), plus, minus, opt);
}

}  // namespace

TEST(IndexCurve, Counting) {
  const IndexCurve c(Side::plus, {1.0, 2.0, 2.0, 5.0}, 10.0);
  EXPECT_EQ(c.index_at(0.5), 0);
  EXPECT_EQ(c.index_at(1.0), 0);
  EXPECT_EQ(c.index_at(1.5), 1);
  EXPECT_EQ(c.index_at(2.5), 3);
  EXPECT_EQ(c.index_at(10.0), 4);
  EXPECT_THROW(c.index_at(11.0), ParamError);
  EXPECT_THROW(IndexCurve(Side::plus, {2.0, 1.0}, 3.0), ParamError);
  EXPECT_THROW(IndexCurve(Side::plus, {0.0}, 3.0), ParamError);
}

TEST(LambdaProfile, SingleEigenvalue) {
  const auto arith = arithmetic_structure(cantor());
  const double nu = *arith.nu;
  const double t1 = 0.5;
  const IndexCurve c(Side::plus, {std::exp(nu * t1)}, std::exp(nu * 4.0));
  const double eps = 0.05;
  const std::vector<double> before{t1 - eps - 0.01, t1 - eps};
  const auto zero = lambda_profile(c, arith, eps, before);
  EXPECT_EQ(zero[0], 0.0);
  // the jump sits at ln(exp(nu t1)) / nu, t1 only up to roundoff
  EXPECT_NEAR(zero[1], 0.0, 1e-14);
  const std::vector<double> after{t1, 1.0, 2.5};
  const auto vals = lambda_profile(c, arith, eps, after);
  for (std::size_t i = 0; i < after.size(); ++i) {
    EXPECT_NEAR(vals[i], std::exp(-arith.D * nu * after[i] / 2.0), 1e-14);
  }
  // halfway through the step
  const std::vector<double> mid{t1 - eps / 2.0};
  EXPECT_NEAR(lambda_profile(c, arith, eps, mid)[0], 0.5 * std::exp(-arith.D * nu * mid[0] / 2.0), 1e-12);
}

TEST(LambdaProfile, RiemannSumOracle) {
  const auto arith = arithmetic_structure(cantor());
  const double nu = *arith.nu;
  const auto curve = table1_curve();
  const double eps = 0.05;
  const double t = std::log(1e3) / nu;
  const int n = 1'000'000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = t + eps * (i + 0.5) / n;
    acc += curve.index_at(std::exp(nu * z));
  }
  const double oracle = std::exp(-arith.D * nu * t / 2.0) * acc / n;
  const std::vector<double> ts{t};
  EXPECT_NEAR(lambda_profile(curve, arith, eps, ts)[0], oracle, 1e-6);
}

TEST(LambdaProfile, Guards) {
  const auto arith = arithmetic_structure(cantor());
  const auto curve = table1_curve();
  const std::vector<double> late{10.0};
  EXPECT_THROW(lambda_profile(curve, arith, 0.05, late), ParamError);
  const std::vector<double> t{1.0};
  EXPECT_THROW(lambda_profile(curve, arith, 0.0, t), ParamError);
  EXPECT_THROW(lambda_profile(curve, arithmetic_structure(linear(3)), 0.05, t), HypothesisError);
}

// Multiplying the spectrum by e^nu moves Lambda one period to the right and
// rescales it by e^{-D nu / 2}.
TEST(LambdaProfile, ScaleCovariance) {
  const auto arith = arithmetic_structure(cantor());
  const double nu = *arith.nu;
  const auto curve = table1_curve();
  std::vector<double> scaled;
  for (double m : curve.magnitudes()) scaled.push_back(m * std::exp(nu));
  const IndexCurve shifted(Side::plus, scaled, curve.coverage() * std::exp(nu));
  std::vector<double> t, t_minus;
  for (int i = 0; i < 300; ++i) {
    t.push_back(2.0 + i * 0.01);
    t_minus.push_back(1.0 + i * 0.01);
  }
  const auto a = lambda_profile(shifted, arith, 0.05, t);
  const auto b = lambda_profile(curve, arith, 0.05, t_minus);
  const double factor = std::exp(-arith.D * nu / 2.0);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(a[i], factor * b[i], 1e-12);
}

TEST(Bounds, TableOneCertificate) {
  const auto arith = arithmetic_structure(cantor());
  const auto curve = table1_curve();
  const double l14 = curve.magnitudes()[13] * (1.0 + 1e-9);
  const double l17 = curve.magnitudes()[16] * (1.0 + 1e-9);
  const auto b14 = bound_at(arith, l14, curve.index_at(l14), 2);
  const auto b17 = bound_at(arith, l17, curve.index_at(l17), 2);
  EXPECT_EQ(b14.index, 14);
  EXPECT_EQ(b17.index, 17);
  EXPECT_GE(b14.lower, 0.60);
  EXPECT_LE(b17.upper, 0.56);
}

TEST(Bounds, HatAtTenThousand) {
  const auto arith = arithmetic_structure(hat_p());
  const auto f = assemble(hat_p(), build_grid(hat_p(), 9));
  const auto bp = bound_at(arith, 1e4, inertia_index(f, 1e4).index, 2);
  const auto bm = bound_at(arith, 1e4, inertia_index(f, -1e4).index, 2);
  EXPECT_GE(bp.lower, 0.48);
  EXPECT_LE(bm.upper, 0.15);
  EXPECT_NEAR(bp.t, 4.0 * std::log(10.0) / std::log(6.0), 1e-12);
}

TEST(Bounds, EmptyCurveShrinks) {
  const auto arith = arithmetic_structure(cantor());
  const IndexCurve short_curve(Side::minus, {}, 1e3);
  const IndexCurve long_curve(Side::minus, {}, 1e8);
  const auto a = s_bounds(short_curve, arith, 2);
  const auto b = s_bounds(long_curve, arith, 2);
  ASSERT_TRUE(b.minus.present);
  EXPECT_FALSE(b.plus.present);
  for (std::size_t i = 0; i < b.t_grid.size(); ++i) {
    EXPECT_EQ(b.minus.points[i].lower, 0.0);
    EXPECT_LT(b.minus.points[i].upper, a.minus.points[i].upper);
    EXPECT_LT(b.minus.points[i].upper, 2.0 * std::pow(1e8, -arith.D / 2.0) * std::exp(arith.D * *arith.nu / 2.0) + 1e-15);
  }
}

TEST(Bounds, EnvelopeIsOrdered) {
  const auto arith = arithmetic_structure(cantor());
  const auto b = s_bounds(table1_curve(), arith, 2);
  for (const auto& p : b.plus.points) {
    EXPECT_LE(p.lower, p.upper);
    EXPECT_GE(p.lower, 0.0);
  }
  // samples come in pairs just above and below each eigenvalue
  EXPECT_GE(b.plus.samples.size(), 2u * 20u - 1u);
  for (const auto& smp : b.plus.samples) EXPECT_LE(smp.lower, smp.upper);
}

TEST(Estimate, CantorAgreesWithEnvelope) {
  const auto p = cantor();
  const auto s = spectra(p, 8, 60);
  const auto est = estimate(p, s);
  const auto bounds = s_bounds(IndexCurve::from_report(s.plus), arithmetic_structure(p), 2);
  ASSERT_TRUE(est.plus.present);
  for (std::size_t i = 0; i < est.t_grid.size(); ++i) {
    const auto& e = est.plus.points[i];
    const auto& b = bounds.plus.points[i];
    EXPECT_LE(e.lower, b.upper) << "t " << est.t_grid[i];
    EXPECT_GE(e.upper, b.lower) << "t " << est.t_grid[i];
    EXPECT_LE(e.lower, e.estimate);
    EXPECT_LE(e.estimate, e.upper);
  }
}

TEST(Estimate, PositiveWhereSpectrumExists) {
  for (const auto& p : {cantor(), hat_p()}) {
    const auto s = spectra(p, 8, 60);
    const auto est = estimate(p, s);
    double lo = 1e300;
    for (const auto& pt : est.plus.points) lo = std::min(lo, pt.lower);
    EXPECT_GT(lo, 0.0);
  }
}

TEST(Estimate, CoupledIdentityForTilde) {
  const auto p = tilde_p(0.2);
  const auto s = spectra(p, 8, 100);
  const auto est = estimate(p, s);
  ASSERT_TRUE(est.coupled);
  for (std::size_t i = 0; i < est.t_grid.size(); ++i) {
    EXPECT_EQ(est.plus.points[i].estimate, est.minus.points[i].estimate);
    const double gap = std::abs(est.plus.direct[i] - est.minus.direct[i]);
    EXPECT_LE(gap, est.plus.band[i] + est.minus.band[i]) << "t " << est.t_grid[i];
  }
}

TEST(Estimate, NoSpectrumGivesZero) {
  const auto p = cantor();
  const IndexCurve plus(Side::plus, {}, 1e8), minus(Side::minus, {}, 1e8);
  const auto est = s_estimate(p, arithmetic_structure(p), plus, minus);
  ASSERT_TRUE(est.plus.present);
  for (const auto& pt : est.plus.points) {
    EXPECT_EQ(pt.estimate, 0.0);
    EXPECT_EQ(pt.upper, 0.0);
  }
  EXPECT_NE(est.note.find("identically zero"), std::string::npos);
}

TEST(Estimate, Refusals) {
  const IndexCurve plus(Side::plus, {}, 1e8), minus(Side::minus, {}, 1e8);
  const auto l3 = linear(3);
  EXPECT_THROW(s_estimate(l3, arithmetic_structure(l3), plus, minus), HypothesisError);
  // lags (2, 1) with d_1 > 0 and d_2 < 0: neither parity clause holds
  const auto odd = validate_params({0.5, 0.5}, {0.125, -0.5}, {0.0, 0.3});
  const auto arith = arithmetic_structure(odd);
  ASSERT_TRUE(arith.arithmetic);
  EXPECT_FALSE(arith.parity_condition);
  EXPECT_THROW(s_estimate(odd, arith, plus, minus), HypothesisError);
  EXPECT_THROW(s_estimate(cantor(), arithmetic_structure(cantor()), minus, plus), ParamError);
}

TEST(Estimate, ExtrapolationIsReported) {
  const auto p = cantor();
  const auto s = spectra(p, 8, 60);
  const auto est = estimate(p, s);
  ASSERT_EQ(est.plus.extrapolated.size(), est.t_grid.size());
  for (double v : est.plus.extrapolated) EXPECT_TRUE(std::isfinite(v));
  EXPECT_NE(est.note.find("Richardson"), std::string::npos);
}

TEST(ExponentFit, PureSquares) {
  std::vector<double> m;
  for (int n = 1; n <= 50; ++n) m.push_back(static_cast<double>(n) * n);
  const auto fit = exponent_fit(m);
  EXPECT_NEAR(fit.slope, 2.0, 1e-12);
  EXPECT_NEAR(fit.r2, 1.0, 1e-12);
  std::vector<double> few(m.begin(), m.begin() + 5);
  EXPECT_THROW(exponent_fit(few), ParamError);
}

TEST(ExponentFit, ModulatedPowerLaw) {
  const double D = 2.0 * std::log(2.0) / std::log(6.0);
  std::vector<double> m;
  for (int n = 1; n <= 2000; ++n) {
    const double phase = std::log(static_cast<double>(n)) / std::log(2.0);
    m.push_back(3.0 * std::pow(n, 2.0 / D) * (1.0 + 0.2 * std::sin(2.0 * std::numbers::pi * phase)));
  }
  EXPECT_NEAR(exponent_fit(m).slope / (2.0 / D), 1.0, 0.05);
}

TEST(Splitting, CantorSamples) {
  const double lambdas[] = {50.0, 500.0, 5000.0};
  const auto rep = check_splitting_inequality(cantor(), 8, lambdas);
  for (const auto& s : rep.samples) {
    if (s.converged) EXPECT_TRUE(s.holds) << s.lambda;
    EXPECT_TRUE(s.nested_holds);
  }
  EXPECT_EQ(rep.violations, 0);
  EXPECT_GT(rep.converged, 0);
}

TEST(Splitting, ZeroLambda) {
  const double zero[] = {0.0};
  const auto rep = check_splitting_inequality(cantor(), 3, zero);
  ASSERT_EQ(rep.samples.size(), 1u);
  EXPECT_EQ(rep.samples[0].index, 0);
  EXPECT_EQ(rep.samples[0].scaled_sum, 0);
  EXPECT_TRUE(rep.samples[0].holds);
}

TEST(Splitting, MixedSignTilde) {
  const double l[] = {1e3};
  const auto rep = check_splitting_inequality(tilde_p(0.2), 8, l);
  EXPECT_TRUE(rep.samples[0].nested_holds);
  if (rep.samples[0].converged) EXPECT_TRUE(rep.samples[0].holds);
  EXPECT_EQ(rep.violations, 0);
}
