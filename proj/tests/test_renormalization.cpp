#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

#include "conic/renormalization.hpp"
#include "support.hpp"

using namespace conic;
using conic_test::rel_err;
constexpr double kPi = std::numbers::pi;

namespace {

const TraceIntegrator& plane_integ() {
  static const TraceIntegrator integ(cone_trace_source(ConeGeometry::over_circle(2 * kPi)));
  return integ;
}

const TraceIntegrator& wedge_integ() {
  static const TraceIntegrator integ(cone_trace_source(ConeGeometry::over_circle(1.5 * kPi)));
  return integ;
}

const TraceIntegrator& space_integ() {
  static const TraceIntegrator integ(cone_trace_source(ConeGeometry::over_sphere(2)));
  return integ;
}

// Cone over a round 2-sphere of radius rho, given as a file-style spectrum.
ConeGeometry scaled_sphere_cone(double rho, int modes = 400) {
  Spectrum s = sphere_spectrum(2, static_cast<double>(modes) * (modes + 1) * (1 + 1e-12));
  s.source = SpectrumSource::file;
  for (auto& e : s.entries) e.lambda /= rho * rho;
  return ConeGeometry(3, s, 4 * kPi * rho * rho);
}

RenormConfig narrow_fit() {
  RenormConfig rc;
  rc.s_switch = 5e-4;
  rc.fit_s_max = 1e-2;
  return rc;
}

// G(s) = c / s + b: a two-dimensional source with f_log = -b.
TraceSource synthetic_source(double c, double b) {
  TraceSource src;
  src.n = 2;
  src.density = [c, b](double s) { return c / s + b; };
  src.core = [](double) { return 0.0; };
  src.label = "synthetic";
  return src;
}

TraceSweep exact_sweep(const std::function<double(double)>& f) {
  TraceSweep sw;
  sw.delta = default_delta_grid();
  for (double d : sw.delta) sw.values.push_back(f(d));
  return sw;
}

}  // namespace

TEST(TruncatedTrace, PlaneSharpIsPureInverseSquare) {
  for (double t : {0.5, 1.0, 3.0})
    for (double delta : {0.25, 0.01, 1e-4})
      EXPECT_LT(rel_err(plane_integ().truncated_trace(t, delta, Cutoff::sharp()), 1.0 / (4 * t * delta * delta)), 1e-10);
}

TEST(TruncatedTrace, FreeFunctionMatchesIntegrator) {
  const auto cone = ConeGeometry::over_circle(2 * kPi);
  EXPECT_LT(rel_err(truncated_trace_cone(cone, 1.0, 0.1, Cutoff::sharp()), 25.0), 1e-10);
}

TEST(TruncatedTrace, MonotoneInDelta) {
  double prev = 0.0;
  for (double delta : {0.4, 0.2, 0.1, 0.05, 0.01, 1e-3}) {
    const double v = wedge_integ().truncated_trace(1.0, delta, Cutoff::sharp());
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(TruncatedTrace, RejectsBadArguments) {
  EXPECT_THROW(plane_integ().truncated_trace(1.0, 0.5, Cutoff::sharp()), InvalidArgument);
  EXPECT_THROW(plane_integ().truncated_trace(1.0, 0.0, Cutoff::sharp()), InvalidArgument);
  EXPECT_THROW(plane_integ().truncated_trace(0.0, 0.1, Cutoff::sharp()), InvalidArgument);
}

TEST(DivergentFit, ExactInverseSquarePlusConstant) {
  const auto e = fit_divergent_expansion(exact_sweep([](double d) { return 3.0 / (d * d) + 0.7; }), 2);
  EXPECT_LT(rel_err(e.f[0], 3.0), 1e-12);
  EXPECT_NEAR(e.f[1], 0.0, 1e-9);
  EXPECT_NEAR(e.f_log, 0.0, 1e-9);
  EXPECT_NEAR(e.finite_part, 0.7, 1e-9);
  EXPECT_LT(e.residual_norm, 1e-12 * 3.0 / std::pow(default_delta_grid().back(), 2));
}

TEST(DivergentFit, RecoversLogCoefficient) {
  const auto e = fit_divergent_expansion(
      exact_sweep([](double d) { return 0.5 / (d * d) - 0.2 / d + 0.37 * std::log(d) - 1.1; }), 2);
  EXPECT_NEAR(e.f_log, 0.37, 1e-8);
  EXPECT_NEAR(e.f[1], -0.2, 1e-8);
  EXPECT_NEAR(e.finite_part, -1.1, 1e-8);
}

TEST(DivergentFit, PlaneFinitePartVanishes) {
  const auto e = renormalized_expansion(plane_integ(), 1.0);
  EXPECT_NEAR(e.finite_part, 0.0, 1e-10);
  EXPECT_LT(rel_err(e.f[0], 0.25), 1e-10);
}

TEST(DivergentFit, Idempotent) {
  const auto first = renormalized_expansion(wedge_integ(), 1.0);
  TraceSweep again;
  again.delta = default_delta_grid();
  for (double d : again.delta) again.values.push_back(first.evaluate(d));
  const auto second = fit_divergent_expansion(again, 2);
  EXPECT_LT(rel_err(second.f[0], first.f[0]), 1e-13);
  EXPECT_NEAR(second.f[1], first.f[1], 1e-12 * std::abs(first.f[0]));
  EXPECT_NEAR(second.f_log, first.f_log, 1e-12);
  EXPECT_NEAR(second.finite_part, first.finite_part, 1e-11);
}

TEST(DivergentFit, ConditioningErrors) {
  TraceSweep narrow;
  for (double d : {0.1, 0.09, 0.08, 0.07, 0.06, 0.05}) {
    narrow.delta.push_back(d);
    narrow.values.push_back(1.0 / (d * d));
  }
  EXPECT_THROW(fit_divergent_expansion(narrow, 2), ConditioningError);
  TraceSweep few = exact_sweep([](double d) { return 1.0 / d; });
  few.delta.resize(4);
  few.values.resize(4);
  EXPECT_THROW(fit_divergent_expansion(few, 2), ConditioningError);
  try {
    fit_divergent_expansion(narrow, 2);
  } catch (const ConditioningError& e) {
    EXPECT_NE(std::string(e.what()).find("2^-3"), std::string::npos);
  }
}

TEST(DivergentFit, FlatConeLeadingCoefficient) {
  for (double len : {kPi, 1.5 * kPi, 3 * kPi}) {
    const TraceIntegrator integ(cone_trace_source(ConeGeometry::over_circle(len)));
    for (double t : {0.5, 2.0}) {
      const auto e = renormalized_expansion(integ, t);
      EXPECT_LT(rel_err(e.f[0], len / (8 * kPi * t)), 1e-8) << "L=" << len << " t=" << t;
      EXPECT_NEAR(e.f_log, 0.0, 1e-8);
    }
  }
}

TEST(RenormalizedTrace, EuclideanSpacesVanish) {
  for (double t : {0.3, 1.0, 4.0}) {
    EXPECT_NEAR(renormalized_trace(plane_integ(), t), 0.0, 1e-10);
    EXPECT_NEAR(renormalized_trace(space_integ(), t), 0.0, 1e-8);
  }
}

TEST(RenormalizedTrace, FlatConeIsTimeIndependent) {
  const double ref = renormalized_trace(wedge_integ(), 1.0);
  EXPECT_GT(std::abs(ref), 1e-3);
  for (double t : {0.25, 0.5, 2.0, 4.0}) EXPECT_NEAR(renormalized_trace(wedge_integ(), t), ref, 1e-6 * std::abs(ref));
}

// Corner contribution of a flat sector: (1/12)(2 pi / L - L / 2 pi).
TEST(RenormalizedTrace, FlatConeMatchesClosedForm) {
  for (double len : {1.5 * kPi, 3 * kPi, 5.0, 2.5 * kPi}) {
    const double want = (2 * kPi / len - len / (2 * kPi)) / 12.0;
    EXPECT_NEAR(renormalized_trace(ConeGeometry::over_circle(len), 1.0), want, 1e-8) << "L=" << len;
  }
}

TEST(RenormalizedTrace, ContinuousAtThePlane) {
  double prev = 1.0;
  for (double eps : {0.1, 0.01}) {
    double worst = 0.0;
    for (double sign : {1.0, -1.0}) {
      const auto cone = ConeGeometry::over_circle(2 * kPi + sign * eps);
      worst = std::max(worst, std::abs(renormalized_trace(cone, 1.0)));
    }
    EXPECT_LT(worst, prev);
    prev = worst;
  }
  EXPECT_LT(prev, 1e-2);
}

TEST(RenormalizedTrace, CompactPerturbationShiftsFinitePart) {
  auto base = std::make_shared<const TraceIntegrator>(cone_trace_source(ConeGeometry::over_circle(1.5 * kPi)));
  TraceSource perturbed = base->source();
  perturbed.core = [base](double t) { return base->core(t) + 0.25 * std::exp(-t); };
  const TraceIntegrator integ(perturbed);
  for (double t : {0.5, 2.0})
    EXPECT_NEAR(renormalized_trace(integ, t) - renormalized_trace(*base, t), 0.25 * std::exp(-t), 1e-9);
}

TEST(HeatCoefficients, Plane) {
  const auto& a = plane_integ().coefficients().a;
  ASSERT_EQ(a.size(), 3u);
  EXPECT_NEAR(a[0], 0.5, 1e-6);
  EXPECT_NEAR(a[1], 0.0, 1e-6);
  EXPECT_NEAR(a[2], 0.0, 1e-6);
}

TEST(HeatCoefficients, FlatConeAndSphereCone) {
  EXPECT_NEAR(wedge_integ().coefficients().a[0], 1.5 * kPi / (4 * kPi), 1e-8);
  EXPECT_NEAR(space_integ().coefficients().a[0], std::pow(4 * kPi, -1.5) * 4 * kPi, 1e-8);
  const TraceIntegrator scaled(cone_trace_source(scaled_sphere_cone(0.8)), narrow_fit());
  EXPECT_NEAR(scaled.coefficients().a[0], std::pow(4 * kPi, -1.5) * 4 * kPi * 0.64, 1e-6);
}

TEST(HeatCoefficients, RegimeErrorWhenGridTooWide) {
  const auto src = cone_trace_source(ConeGeometry::over_circle(1.5 * kPi));
  EXPECT_THROW(fit_heat_coefficients(src, geometric_grid(1e-2, 5.0, 24)), FitError);
  EXPECT_THROW(fit_heat_coefficients(src, {1e-3, 2e-3}), InvalidArgument);
}

TEST(HeatCoefficients, FittedLogCoefficientIsMinusTopCoefficient) {
  const auto round = renormalized_expansion(space_integ(), 1.0);
  EXPECT_NEAR(round.f_log, -space_integ().coefficients().a[3], 1e-4);
  // Off the unit sphere the fitted a_3 and f_log both carry the bias of the truncated
  // short-time fit, so the agreement is only as good as that fit.
  const TraceIntegrator scaled(cone_trace_source(scaled_sphere_cone(0.8)), narrow_fit());
  const auto e = renormalized_expansion(scaled, 1.0);
  EXPECT_NEAR(e.f_log, -scaled.coefficients().a[3], 5e-4);
}

TEST(Predictions, FlatConeValues) {
  const auto p = predicted_divergent_coefficients(wedge_integ().coefficients(), 2, 1.0);
  ASSERT_EQ(p.f_stated.size(), 2u);
  EXPECT_NEAR(p.f_log, 0.0, 1e-8);
  EXPECT_NEAR(std::abs(p.f_stated[0]), 1.5 * kPi / (8 * kPi), 1e-8);
  EXPECT_LT(p.f_stated[0], 0.0);
  EXPECT_GT(p.f_corrected[0], 0.0);
  const auto e = renormalized_expansion(wedge_integ(), 1.0);
  EXPECT_NEAR(e.f[0], p.f_corrected[0], 1e-8);
  EXPECT_THROW(predicted_divergent_coefficients(HeatCoefficients{{1.0}, 0.0}, 2, 1.0), InvalidArgument);
}

TEST(CutoffMoments, SharpLimitAndSymmetry) {
  const auto steep = cutoff_moments(Cutoff::smooth(0.999, 1.001), 2);
  for (double l : steep.l) EXPECT_NEAR(l, 1.0, 5e-3);
  EXPECT_NEAR(steep.l_log, 0.0, 1e-3);
  const auto sym = cutoff_moments(Cutoff::smooth(0.5, 2.0), 3);
  EXPECT_NEAR(sym.l_log, 0.0, 1e-14);
  const auto asym = cutoff_moments(Cutoff::smooth(0.6, 1.9), 3);
  for (const auto* m : {&sym, &asym})
    for (std::size_t k = 0; k < m->l.size(); ++k) {
      EXPECT_GT(m->l[k], 0.0);
      EXPECT_GT(m->l_stated[k], 0.0);
    }
  const auto sharp = cutoff_moments(Cutoff::sharp(), 2);
  EXPECT_EQ(sharp.l, std::vector<double>({1.0, 1.0}));
  EXPECT_EQ(sharp.l_log, 0.0);
}

TEST(CutoffMoments, ProfileShape) {
  const auto chi = Cutoff::smooth();
  EXPECT_EQ(chi(0.3), 1.0);
  EXPECT_EQ(chi(0.5), 1.0);
  EXPECT_EQ(chi(2.0), 0.0);
  EXPECT_NEAR(chi(1.0), 0.5, 1e-15);
  double prev = 1.0;
  for (double r = 0.5; r <= 2.0; r += 0.01) {
    EXPECT_LE(chi(r), prev);
    EXPECT_LE(chi.derivative(r), 0.0);
    prev = chi(r);
  }
  EXPECT_THROW(Cutoff::smooth(0.4, 2.0), InvalidArgument);
  EXPECT_THROW(Cutoff::smooth(1.2, 1.1), InvalidArgument);
}

TEST(CompareCutoffs, FlatConeFinitePartsAgree) {
  const auto c = compare_cutoffs(wedge_integ(), 1.0, Cutoff::smooth(0.6, 1.9));
  EXPECT_NEAR(c.smooth.finite_part, c.sharp.finite_part, 1e-6);
  EXPECT_NEAR(c.smooth.f[0] / c.sharp.f[0], c.moments.l[0], 1e-6);
  EXPECT_LT(c.max_deviation, 1e-6);
}

TEST(CompareCutoffs, SharpSelfComparisonIsZero) {
  const auto c = compare_cutoffs(wedge_integ(), 1.0, Cutoff::sharp());
  EXPECT_EQ(c.max_deviation, 0.0);
  EXPECT_EQ(c.finite_part_shift, 0.0);
}

TEST(CompareCutoffs, LogTermShiftsFinitePart) {
  const TraceIntegrator integ(synthetic_source(0.3, 0.7));
  const auto c = compare_cutoffs(integ, 1.0, Cutoff::smooth(0.6, 1.9));
  EXPECT_NEAR(c.sharp.f_log, -0.7, 1e-8);
  EXPECT_LT(c.coefficient_deviation, 1e-6);
  EXPECT_LT(c.log_deviation, 1e-6);
  EXPECT_LT(c.shift_deviation, 1e-8);
  EXPECT_GT(c.stated_shift_deviation, 1e-3);
}

TEST(SweepOutput, CsvColumns) {
  const auto sw = trace_sweep(plane_integ(), 1.0, Cutoff::sharp());
  std::ostringstream a, b;
  write_sweep_csv(a, sw);
  write_expansion_csv(b, fit_divergent_expansion(sw, 2));
  EXPECT_EQ(a.str().substr(0, 12), "delta,value\n");
  EXPECT_EQ(b.str().substr(0, 34), "term,exponent,logpower,coefficient");
  EXPECT_NE(b.str().find("f_log,0,1,"), std::string::npos);
  EXPECT_EQ(sw.delta.size(), 18u);
  EXPECT_DOUBLE_EQ(sw.delta.front(), 0.125);
}

TEST(SweepOutput, DeltaGridFollowsTime) {
  const auto g = default_delta_grid(100.0);
  EXPECT_EQ(g.size(), 18u);
  EXPECT_LE(g.front() * g.front() * 100.0, 1.0 / 64.0);
  for (double d : g) EXPECT_LT(d, 0.5);
}
