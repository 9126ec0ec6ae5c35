#include <gtest/gtest.h>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/bessel_prime.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <complex>
#include <numbers>

#include "conic/errors.hpp"
#include "conic/quadrature.hpp"
#include "conic/special_functions.hpp"
#include "support.hpp"

using namespace conic;
using conic_test::rel_err;
using cd = std::complex<double>;

namespace {

const double kOrders[] = {0.0, 0.5, 1.0, 2.5, 7.0};

std::vector<double> x_grid() {
  std::vector<double> xs;
  for (int i = 0; i <= 40; ++i) xs.push_back(0.1 * std::pow(500.0, i / 40.0));
  return xs;
}

}  // namespace

TEST(BesselOracle, RealIMatchesBoostOnValidatedGrid) {
  for (double nu : {0.0, 0.3, 1.0, 2.5, 7.0, 20.0, 50.0})
    for (double x : {1e-3, 0.1, 1.0, 1.9, 2.1, 10.0, 30.0, 100.0, 200.0}) {
      const double want = boost::math::cyl_bessel_i(nu, x);
      if (!std::isfinite(want) || want < 1e-290) continue;
      EXPECT_LT(rel_err(bessel_i(nu, x), want), 1e-12) << "nu=" << nu << " x=" << x;
    }
}

TEST(BesselOracle, RealKMatchesBoostOnValidatedGrid) {
  for (double nu : {0.0, 0.3, 1.0, 2.5, 7.0, 20.0, 50.0})
    for (double x : {1e-3, 0.1, 1.0, 1.9, 2.1, 10.0, 30.0, 100.0, 200.0}) {
      const double want = boost::math::cyl_bessel_k(nu, x);
      if (!std::isfinite(want) || want > 1e290) continue;
      EXPECT_LT(rel_err(bessel_k(nu, x), want), 1e-12) << "nu=" << nu << " x=" << x;
    }
}

TEST(BesselOracle, DerivativesMatchBoost) {
  for (double nu : kOrders)
    for (double x : {0.2, 1.7, 5.0, 40.0}) {
      EXPECT_LT(rel_err(bessel_i_prime(nu, x), boost::math::cyl_bessel_i_prime(nu, x)), 1e-11);
      EXPECT_LT(rel_err(bessel_k_prime(nu, x), boost::math::cyl_bessel_k_prime(nu, x)), 1e-11);
    }
}

TEST(BesselOracle, ScaledFormsStayFiniteWhereUnscaledOverflow) {
  const double x = 800.0;
  const double si = bessel_i_scaled(3.0, x);
  const double sk = bessel_k_scaled(3.0, x);
  EXPECT_TRUE(std::isfinite(si));
  EXPECT_TRUE(std::isfinite(sk));
  // Leading large-argument behaviour e^{-x} I ~ 1/sqrt(2 pi x), e^{x} K ~ sqrt(pi/2x).
  EXPECT_NEAR(si * std::sqrt(2.0 * std::numbers::pi * x), 1.0, 1e-2);
  EXPECT_NEAR(sk / std::sqrt(std::numbers::pi / (2.0 * x)), 1.0, 1e-2);
}

// Reference values computed with mpmath at 30 digits.
TEST(BesselOracle, ComplexArgumentsMatchFrozenReference) {
  struct Ref {
    double nu;
    cd z, i, k;
  };
  const Ref refs[] = {
      {0.0, {1.5, 2.0}, {0.13128846451431935756, 1.1115027613280065494}, {-0.13008489722328320482, -0.11184203197635645441}},
      {2.5, {3.0, -4.0}, {-1.5053769008444608791, 2.0551636148855218865}, {0.0069859666598375948151, -0.039963797668163374902}},
      {1.0, {-0.5, 0.8}, {-0.19850191414492258876, 0.40369710193892194282}, {-1.3259281146403122312, -1.5957667118699962627}},
      {7.0, {10.0, 10.0}, {-88.479827503492335652, -665.93047842575160719}, {2.6387011709436540805e-5, 4.4703455709300005123e-5}},
      {0.3, {0.2, 0.1}, {0.57455260820974690922, 0.084936286665093419697}, {1.7791219130174045729, -0.52834558509101195705}},
  };
  for (const auto& r : refs) {
    EXPECT_LT(std::abs(bessel_i(r.nu, r.z) - r.i) / std::abs(r.i), 1e-10) << "I nu=" << r.nu;
    EXPECT_LT(std::abs(bessel_k(r.nu, r.z) - r.k) / std::abs(r.k), 1e-10) << "K nu=" << r.nu;
  }
}

TEST(BesselExamples, IZeroAtZeroIsOne) { EXPECT_EQ(bessel_i(0.0, 0.0), 1.0); }

TEST(BesselExamples, ISmallArgumentMatchesLeadingPower) {
  for (double nu : {0.5, 1.0, 2.5, 7.0}) {
    double prev = 2.0;
    for (double r : {1e-2, 1e-4, 1e-6}) {
      const double ratio = bessel_i(nu, r) / (std::pow(0.5 * r, nu) / std::tgamma(nu + 1.0));
      EXPECT_LT(std::abs(ratio - 1.0), std::abs(prev - 1.0) + 1e-15);
      prev = ratio;
    }
    EXPECT_NEAR(prev, 1.0, 1e-10);
  }
}

TEST(BesselExamples, WronskianAtOrderTwoAndAHalf) {
  const double nu = 2.5, x = 1.7;
  const double w = bessel_i(nu, x) * bessel_k_prime(nu, x) - bessel_i_prime(nu, x) * bessel_k(nu, x);
  EXPECT_LT(rel_err(w, -1.0 / x), 1e-12);
}

TEST(BesselExamples, KZeroSmallArgumentConstant) {
  const double target = std::numbers::ln2 - kEulerGamma;
  EXPECT_NEAR(bessel_k(0.0, 1e-8) + std::log(1e-8), target, 1e-10);
  double prev = 1.0;
  for (double r : {1e-2, 1e-4, 1e-6}) {
    const double gap = std::abs(bessel_k(0.0, r) + std::log(r) - target);
    EXPECT_LT(gap, prev);
    prev = gap;
  }
}

TEST(BesselExamples, KSmallArgumentLeadingPower) {
  for (double nu : {1.0, 2.0}) {
    const double r = 1e-6;
    EXPECT_NEAR(bessel_k(nu, r) * std::pow(0.5 * r, nu), std::tgamma(nu) / 2.0, 1e-9);
  }
}

TEST(BesselExamples, KHalfClosedForm) {
  EXPECT_LT(rel_err(bessel_k(0.5, 1.0), std::sqrt(std::numbers::pi / 2.0) * std::exp(-1.0)), 1e-14);
}

TEST(BesselErrors, KAtZeroIsSingular) {
  EXPECT_THROW(bessel_k(0.0, 0.0), SingularityError);
  EXPECT_THROW(bessel_k(1.0, cd(0.0, 0.0)), SingularityError);
}

TEST(BesselErrors, ValidatedRegionBoundary) {
  EXPECT_TRUE(bessel_in_validated_region(50.0, 200.0));
  EXPECT_FALSE(bessel_in_validated_region(50.5, 1.0));
  EXPECT_FALSE(bessel_in_validated_region(1.0, 201.0));
}

TEST(BesselInvariants, WronskianGrid) {
  for (double nu : kOrders)
    for (double x : x_grid()) {
      const double w = bessel_i(nu, x) * bessel_k_prime(nu, x) - bessel_i_prime(nu, x) * bessel_k(nu, x);
      EXPECT_LT(rel_err(w, -1.0 / x), 1e-12) << "nu=" << nu << " x=" << x;
    }
}

TEST(BesselInvariants, RecurrenceOnValidatedRegion) {
  for (double nu : {1.0, 1.5, 2.5, 7.0, 20.0, 49.0})
    for (double x : {0.5, 2.0, 10.0, 50.0, 150.0}) {
      const double lhs = bessel_i(nu - 1.0, x) - bessel_i(nu + 1.0, x);
      const double rhs = 2.0 * nu / x * bessel_i(nu, x);
      EXPECT_LT(rel_err(lhs, rhs), 1e-10) << "nu=" << nu << " x=" << x;
    }
}

TEST(BesselInvariants, ContinuousAcrossSwitchRadius) {
  const BesselEvalConfig cfg;
  const double r = cfg.series_asymptotic_switch_radius;
  for (double nu : kOrders) {
    const double below = std::nextafter(r, 0.0), above = std::nextafter(r, 10.0);
    const double lo = bessel_k(nu, below), hi = bessel_k(nu, above);
    EXPECT_LT(rel_err(lo, hi), 10.0 * cfg.target_rel_tol);
    const double il = bessel_i(nu, below), ih = bessel_i(nu, above);
    EXPECT_LT(rel_err(il, ih), 10.0 * cfg.target_rel_tol);
  }
}

TEST(BesselInvariants, KDecaysAlongContourRays) {
  for (double phi : {0.6 * std::numbers::pi, 0.75 * std::numbers::pi, 0.95 * std::numbers::pi})
    for (double sign : {1.0, -1.0})
      for (double nu : {0.0, 1.0, 3.5}) {
        double prev = std::numeric_limits<double>::infinity();
        for (double rho = 1.0; rho < 200.0; rho *= 2.0) {
          const double v = std::abs(bessel_k(nu, std::polar(rho, sign * phi / 2.0)));
          EXPECT_LT(v, prev);
          prev = v;
        }
      }
}

TEST(BesselInvariants, ProductMatchesSeparateEvaluation) {
  for (double nu : kOrders) {
    const double a = 0.7, b = 3.1;
    EXPECT_LT(rel_err(bessel_ik_product(nu, a, b), bessel_i(nu, a) * bessel_k(nu, b)), 1e-13);
  }
  EXPECT_LT(rel_err(bessel_ik_product(0.0, 0.0, 2.0), bessel_k(0.0, 2.0)), 1e-14);
  EXPECT_EQ(bessel_ik_product(1.0, 0.0, 2.0), 0.0);
}

TEST(GammaOracle, RealValuesMatchBoost) {
  for (double s : {0.1, 0.5, 1.0, 2.3, 7.7, 15.5, 29.0, -0.5, -3.7, -12.2})
    EXPECT_LT(rel_err(gamma_fn(s), boost::math::tgamma(s)), 1e-12) << "s=" << s;
}

// Reference values computed with mpmath at 30 digits.
TEST(GammaOracle, ComplexValuesMatchFrozenReference) {
  const std::pair<cd, cd> refs[] = {
      {{0.5, 3.0}, {0.02144567055243064606, 0.0068653648372616779142}},
      {{-2.5, 1.0}, {-0.041736625807893613745, -0.086369107369763484694}},
      {{4.2, -1.3}, {-0.98500637817694448498, -6.129555052047170418}},
  };
  for (const auto& [s, want] : refs) EXPECT_LT(std::abs(gamma_fn(s) - want) / std::abs(want), 1e-12);
}

TEST(GammaExamples, ClassicalValues) {
  EXPECT_NEAR(gamma_fn(1.0), 1.0, 1e-15);
  EXPECT_LT(rel_err(gamma_fn(0.5), std::sqrt(std::numbers::pi)), 1e-13);
  EXPECT_LT(rel_err(gamma_fn(3.3), 2.3 * gamma_fn(2.3)), 1e-12);
}

TEST(GammaErrors, PolesCarryResidue) {
  try {
    gamma_fn(-2.0);
    FAIL() << "expected a pole";
  } catch (const PoleError& e) {
    EXPECT_EQ(e.order(), 1);
    EXPECT_NEAR(e.residue(), 0.5, 1e-15);
  }
  EXPECT_THROW(gamma_fn(0.0), PoleError);
}

TEST(GammaInvariants, ReciprocalTaylorSeries) {
  EXPECT_EQ(recip_gamma_taylor(0), 0.0);
  EXPECT_NEAR(recip_gamma_taylor(1), 1.0, 1e-15);
  EXPECT_NEAR(recip_gamma_taylor(2), kEulerGamma, 1e-15);
  const double s = 0.3;
  double sum = 0.0;
  for (int k = 0; k < 29; ++k) sum += recip_gamma_taylor(k) * std::pow(s, k);
  EXPECT_LT(rel_err(sum, 1.0 / boost::math::tgamma(s)), 1e-14);
  EXPECT_THROW(recip_gamma_taylor(29), InvalidArgument);
}

TEST(Quadrature, Examples) {
  EXPECT_NEAR(integrate_adaptive([](double t) { return t; }, 0.0, 1.0).value, 0.5, 1e-15);
  EXPECT_NEAR(integrate_adaptive([](double t) { return std::log(t); }, 0.0, 1.0).value, -1.0, 1e-11);
  EXPECT_NEAR(integrate_semi_infinite([](double t) { return std::exp(-t * t); }, 0.0).value,
              std::sqrt(std::numbers::pi) / 2.0, 1e-13);
}

TEST(Quadrature, ComplexIntegrandAndReversedLimits) {
  const auto r = integrate_adaptive([](double t) { return std::exp(cd(0.0, t)); }, 0.0, std::numbers::pi);
  EXPECT_NEAR(r.value.real(), 0.0, 1e-14);
  EXPECT_NEAR(r.value.imag(), 2.0, 1e-14);
  EXPECT_NEAR(integrate_adaptive([](double t) { return t * t; }, 1.0, 0.0).value, -1.0 / 3.0, 1e-15);
}

TEST(Quadrature, NonConvergenceReportsWorstInterval) {
  QuadratureConfig cfg;
  cfg.max_subdivisions = 5;
  try {
    integrate_adaptive([](double t) { return 1.0 / std::sqrt(std::abs(t - 0.3)); }, 0.0, 1.0, cfg);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("worst interval"), std::string::npos);
  }
}

TEST(Quadrature, GaussLegendreIsExactForPolynomials) {
  const auto& rule = gauss_legendre(10);
  double sum_w = 0.0, moment = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    sum_w += rule.weights[i];
    moment += rule.weights[i] * std::pow(rule.nodes[i], 18);
  }
  EXPECT_NEAR(sum_w, 2.0, 1e-14);
  EXPECT_NEAR(moment, 2.0 / 19.0, 1e-14);
  EXPECT_THROW(gauss_legendre(0), InvalidArgument);
  const double panels = integrate_panels([](double t) { return std::cos(t); }, {0.0, 1.0, 2.0, 3.0}, 12);
  EXPECT_NEAR(panels, std::sin(3.0), 1e-14);
}
