#pragma once

// Modified Bessel functions I_nu, K_nu of real order nu >= 0 and real or
// complex argument, and the complex gamma function.
//
// Bessel evaluation follows Temme's method: the ratio I'_nu / I_nu from a
// continued fraction plus downward recurrence to an order mu in [-1/2, 1/2),
// K_mu and K_{mu+1} from Temme's power series (|z| < switch radius) or
// Steed's continued fraction (|z| >= switch radius), the Wronskian for I_mu,
// and forward recurrence for K_nu. Values carry a power-of-two exponent so that
// products such as I_nu(a) K_nu(b) never overflow inside mode sums.

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>

#include "conic/errors.hpp"

namespace conic {

inline constexpr double kEulerGamma = 0.57721566490153286060651209008240243;

struct BesselEvalConfig {
  double target_rel_tol = 1e-12;
  /// |z| below which Temme's series is used for K_mu.
  double series_asymptotic_switch_radius = 2.0;
  int max_terms = 200000;
};

/// Validated region: relative accuracy is test-enforced for nu <= 50, |z| <= 200.
inline constexpr double kBesselMaxValidatedOrder = 50.0;
inline constexpr double kBesselMaxValidatedArgument = 200.0;

inline bool bessel_in_validated_region(double nu, double abs_z) {
  return nu <= kBesselMaxValidatedOrder && abs_z <= kBesselMaxValidatedArgument;
}

/// Scaled Bessel pair at one argument z:
///   e^{-z} I_nu(z) = i * 2^{i_exp},   e^{-z} I'_nu(z) = di * 2^{i_exp}
///   e^{z}  K_nu(z) = k * 2^{k_exp},   e^{z}  K'_nu(z) = dk * 2^{k_exp}
template <class T>
struct ScaledBesselIK {
  T i{}, di{}, k{}, dk{};
  int i_exp = 0;
  int k_exp = 0;
  bool validated = true;
};

namespace detail {

// Taylor coefficients of 1/Gamma(z) = sum_{k>=1} c_k z^k.
inline constexpr std::array<double, 29> kRecipGammaTaylor = {
    0.0,
    1.0,
    0.5772156649015328606065,
    -0.655878071520253881077,
    -0.042002635034095235529,
    0.1665386113822914895017,
    -0.04219773455554433674821,
    -0.009621971527876973562115,
    0.007218943246663099542395,
    -0.001165167591859065112114,
    -0.0002152416741149509728157,
    0.0001280502823881161861532,
    -0.00002013485478078823865569,
    -0.000001250493482142670657345,
    0.000001133027231981695882374,
    -2.05633841697760710345e-7,
    6.116095104481415817862e-9,
    5.002007644469222930056e-9,
    -1.181274570487020144588e-9,
    1.043426711691100510492e-10,
    7.78226343990507125405e-12,
    -3.696805618642205708188e-12,
    5.100370287454475979015e-13,
    -2.058326053566506783222e-14,
    -5.34812253942301798237e-15,
    1.226778628238260790159e-15,
    -1.181259301697458769514e-16,
    1.18669225475160033258e-18,
    1.412380655318031781556e-18};

// Temme's gamma combinations for |mu| <= 1/2:
//   gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu),  gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2.
struct TemmeGammas {
  double gam1, gam2, gampl, gammi;
};

inline TemmeGammas temme_gammas(double mu) {
  // 1/Gamma(1+x) = sum_k c_k x^{k-1}
  double even = 0.0;  // sum over even k of c_k mu^{k-2}
  double odd = 0.0;   // sum over odd k of c_k mu^{k-1}
  const double mu2 = mu * mu;
  double pw = 1.0;
  for (std::size_t k = 2; k < kRecipGammaTaylor.size(); k += 2) {
    even += kRecipGammaTaylor[k] * pw;
    pw *= mu2;
  }
  pw = 1.0;
  for (std::size_t k = 1; k < kRecipGammaTaylor.size(); k += 2) {
    odd += kRecipGammaTaylor[k] * pw;
    pw *= mu2;
  }
  TemmeGammas g{};
  g.gam1 = -even;
  g.gam2 = odd;
  g.gampl = odd + mu * even;  // 1/Gamma(1+mu)
  g.gammi = odd - mu * even;  // 1/Gamma(1-mu)
  return g;
}

inline double abs_value(double v) { return std::abs(v); }
inline double abs_value(const std::complex<double>& v) { return std::abs(v); }

inline double scale2(double v, int e) { return std::ldexp(v, e); }
inline std::complex<double> scale2(const std::complex<double>& v, int e) {
  return {std::ldexp(v.real(), e), std::ldexp(v.imag(), e)};
}

inline constexpr int kRescaleBits = 600;
inline const double kRescaleThreshold = std::ldexp(1.0, kRescaleBits);

template <class T>
T sinhc(const T& e) {
  if (abs_value(e) < 1e-3) {
    const T e2 = e * e;
    return T(1.0) + e2 / 6.0 + e2 * e2 / 120.0;
  }
  return std::sinh(e) / e;
}


// 1/Gamma(1+x) for |x| <= 1 from the Taylor series of 1/Gamma.
inline double recip_gamma_1p(double x) {
  double sum = 0.0;
  for (std::size_t k = kRecipGammaTaylor.size() - 1; k >= 1; --k) sum = sum * x + kRecipGammaTaylor[k];
  return sum;
}

// Ascending series I_nu(z) = sum_k (z/2)^{2k+nu} / (k! Gamma(k+nu+1)), returned scaled by e^{-z}
// as mantissa * 2^{exp2} together with the derivative mantissa.
template <class T>
void ascending_series_i(double nu, T z, double eps, int maxit, T& mant, T& dmant, int& exp2) {
  const int m = static_cast<int>(std::floor(nu));
  const double frac = nu - m;
  // Gamma(nu+1) = Gamma(frac+1) * prod_{j=1}^{m} (frac+j), kept as g * 2^{gexp}.
  double g = 1.0 / recip_gamma_1p(frac);
  int gexp = 0;
  for (int j = 1; j <= m; ++j) {
    g *= (frac + j);
    int e = 0;
    g = std::frexp(g, &e);
    gexp += e;
  }
  // (z/2)^nu e^{-z} = exp(nu log(z/2) - z), split into mantissa and a power of two.
  const T half = 0.5 * z;
  T log_lead = nu * std::log(half) - z;
  double re = 0.0;
  if constexpr (std::is_same_v<T, double>) {
    re = log_lead;
  } else {
    re = log_lead.real();
  }
  const int e2 = static_cast<int>(std::floor(re / std::numbers::ln2));
  T lead = std::exp(log_lead - static_cast<double>(e2) * std::numbers::ln2) / g;
  if constexpr (std::is_same_v<T, double>) {
    // Sharper leading power for real arguments.
    int hexp = 0;
    const double hm = std::frexp(half, &hexp);
    const double whole = std::floor(hexp * nu);
    const double rest = hexp * nu - whole;
    const double lead_re = std::pow(hm, nu) * std::exp2(rest) * std::exp(-z) / g;
    const int shift = static_cast<int>(whole) - e2;
    lead = std::ldexp(lead_re, shift);
  }
  const T q = half * half;
  T term = T(1.0);
  T sum = T(1.0);
  T dsum = T(nu);
  int k = 1;
  for (; k <= maxit; ++k) {
    term *= q / (static_cast<double>(k) * (k + nu));
    sum += term;
    dsum += (2.0 * k + nu) * term;
    if (abs_value(term) <= eps * abs_value(sum)) break;
  }
  if (k > maxit) throw ConvergenceError("Bessel ascending series failed to converge");
  mant = lead * sum;
  dmant = lead * dsum / z;
  exp2 = e2 - gexp;
}

template <class T>
ScaledBesselIK<T> bessel_ik_scaled(double nu, T z, const BesselEvalConfig& cfg) {
  using std::abs;
  if (!(nu >= 0.0) || !std::isfinite(nu)) throw InvalidArgument("Bessel order must be finite and >= 0");
  const double az = abs_value(z);
  if (az == 0.0) throw SingularityError("K_nu(z) is singular at z = 0");
  if constexpr (std::is_same_v<T, double>) {
    if (z < 0.0) throw InvalidArgument("real Bessel argument must be positive (|arg z| < pi)");
  } else {
    if (z.imag() == 0.0 && z.real() < 0.0) throw InvalidArgument("Bessel argument on the branch cut arg z = pi");
  }
  const double eps = std::max(std::min(cfg.target_rel_tol * 1e-4, 1e-15), 1e-17);
  const double tiny = 1e-300;
  const int maxit = cfg.max_terms;

  const int nl = static_cast<int>(nu + 0.5);
  const double mu = nu - nl;
  const double mu2 = mu * mu;
  const T zi = T(1.0) / z;
  const T zi2 = 2.0 * zi;

  const bool small = az < cfg.series_asymptotic_switch_radius;

  // For large |z|: CF1 for f_nu = I'_nu / I_nu (modified Lentz), then downward
  // recurrence to mu. For small |z| the I side comes from the ascending series instead,
  // because the Wronskian route cancels badly as z -> 0.
  T f = T(0.0), ril = T(1.0), ripl = T(0.0), rip1 = T(0.0);
  const T ril1 = T(1.0);
  int down_exp = 0;  // true ril = stored ril * 2^{down_exp}
  if (!small) {
  T h = nu * zi;
  if (abs_value(h) < tiny) h = T(tiny);
  T b = zi2 * nu;
  T d = T(0.0);
  T c = h;
  int it = 1;
  for (; it <= maxit; ++it) {
    b += zi2;
    d = b + d;
    if (abs_value(d) < tiny) d = T(tiny);
    d = T(1.0) / d;
    c = b + T(1.0) / c;
    if (abs_value(c) < tiny) c = T(tiny);
    const T del = c * d;
    h = del * h;
    if (abs_value(del - T(1.0)) < eps) break;
  }
  if (it > maxit) throw ConvergenceError("Bessel CF1 failed to converge (nu=" + std::to_string(nu) + ")");

  ripl = h * ril;
  rip1 = ripl;
  for (int l = nl; l >= 1; --l) {
    // (mu + l) / z formed directly; repeated subtraction loses accuracy at large nl.
    const T ritemp = ((mu + l) * zi) * ril + ripl;
    ripl = ((mu + l - 1) * zi) * ritemp + ril;
    ril = ritemp;
    if (abs_value(ril) > kRescaleThreshold) {
      ril = scale2(ril, -kRescaleBits);
      ripl = scale2(ripl, -kRescaleBits);
      down_exp += kRescaleBits;
    }
  }
  f = ripl / ril;
  }

  // K_mu, K_{mu+1}, both multiplied by e^{z}.
  T rkmu, rk1;
  if (small) {
    const T x2 = 0.5 * z;
    const double pimu = std::numbers::pi * mu;
    const double fact_pi = std::abs(pimu) < 1e-15 ? 1.0 : pimu / std::sin(pimu);
    T dd = -std::log(x2);
    T e = mu * dd;
    const T fact2 = sinhc(e);
    const TemmeGammas g = temme_gammas(mu);
    T ff = fact_pi * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * dd);
    T sum = ff;
    e = std::exp(e);
    T p = 0.5 * e / g.gampl;
    T q = 0.5 / (e * g.gammi);
    T cc = T(1.0);
    dd = x2 * x2;
    T sum1 = p;
    int i = 1;
    for (; i <= maxit; ++i) {
      const double di = static_cast<double>(i);
      ff = (di * ff + p + q) / (di * di - mu2);
      cc *= dd / di;
      p /= (di - mu);
      q /= (di + mu);
      const T del = cc * ff;
      sum += del;
      const T del1 = cc * (p - di * ff);
      sum1 += del1;
      if (abs_value(del) < abs_value(sum) * eps) break;
    }
    if (i > maxit) throw ConvergenceError("Bessel Temme series failed to converge");
    const T ez = std::exp(z);
    rkmu = sum * ez;
    rk1 = sum1 * zi2 * ez;
  } else {
    T bb = 2.0 * (T(1.0) + z);
    T dd = T(1.0) / bb;
    T hh = dd;
    T delh = dd;
    T q1 = T(0.0);
    T q2 = T(1.0);
    const double a1 = 0.25 - mu2;
    T q = T(a1);
    double cc = a1;
    double a = -a1;
    T s = T(1.0) + q * delh;
    int i = 1;
    for (; i <= maxit; ++i) {
      a -= 2.0 * i;
      cc = -a * cc / (i + 1.0);
      const T qnew = (q1 - bb * q2) / a;
      q1 = q2;
      q2 = qnew;
      q += cc * qnew;
      bb += 2.0;
      dd = T(1.0) / (bb + a * dd);
      delh = (bb * dd - T(1.0)) * delh;
      hh += delh;
      const T dels = q * delh;
      s += dels;
      if (abs_value(dels / s) < eps) break;
    }
    if (i > maxit) throw ConvergenceError("Bessel Steed continued fraction failed to converge");
    hh = a1 * hh;
    rkmu = std::sqrt(std::numbers::pi / (2.0 * z)) / s;
    rk1 = rkmu * (mu + z + 0.5 - hh) * zi;
  }

  ScaledBesselIK<T> out;
  if (small) {
    ascending_series_i(nu, z, eps, maxit, out.i, out.di, out.i_exp);
  } else {
    const T rkmup = mu * zi * rkmu - rk1;
    const T rimu = zi / (f * rkmu - rkmup);
    out.i = rimu * ril1 / ril;
    out.di = rimu * rip1 / ril;
    out.i_exp = -down_exp;
  }

  int up_exp = 0;
  for (int i = 1; i <= nl; ++i) {
    const T rktemp = (mu + i) * zi2 * rk1 + rkmu;
    rkmu = rk1;
    rk1 = rktemp;
    if (abs_value(rk1) > kRescaleThreshold) {
      rk1 = scale2(rk1, -kRescaleBits);
      rkmu = scale2(rkmu, -kRescaleBits);
      up_exp += kRescaleBits;
    }
  }
  out.k = rkmu;
  out.dk = nu * zi * rkmu - rk1;
  out.k_exp = up_exp;
  out.validated = bessel_in_validated_region(nu, az);
  return out;
}

template <class T>
T finish(const T& mantissa, int exp2, const T& exp_factor, const char* name) {
  T v = scale2(mantissa, exp2) * exp_factor;
  if (!std::isfinite(abs_value(v))) throw OverflowError(std::string(name) + " overflows double precision");
  return v;
}

}  // namespace detail

/// e^{-z} I_nu(z).
inline double bessel_i_scaled(double nu, double x, const BesselEvalConfig& cfg = {}) {
  if (x == 0.0) return nu == 0.0 ? 1.0 : 0.0;
  const auto r = detail::bessel_ik_scaled(nu, x, cfg);
  return std::ldexp(r.i, r.i_exp);
}

inline std::complex<double> bessel_i_scaled(double nu, std::complex<double> z, const BesselEvalConfig& cfg = {}) {
  if (z == 0.0) return nu == 0.0 ? 1.0 : 0.0;
  const auto r = detail::bessel_ik_scaled(nu, z, cfg);
  return detail::scale2(r.i, r.i_exp);
}

/// e^{z} K_nu(z).
inline double bessel_k_scaled(double nu, double x, const BesselEvalConfig& cfg = {}) {
  const auto r = detail::bessel_ik_scaled(nu, x, cfg);
  return detail::finish(r.k, r.k_exp, 1.0, "scaled K_nu");
}

inline std::complex<double> bessel_k_scaled(double nu, std::complex<double> z, const BesselEvalConfig& cfg = {}) {
  const auto r = detail::bessel_ik_scaled(nu, z, cfg);
  return detail::finish(r.k, r.k_exp, std::complex<double>(1.0), "scaled K_nu");
}

inline double bessel_i(double nu, double x, const BesselEvalConfig& cfg = {}) {
  if (x == 0.0) return nu == 0.0 ? 1.0 : 0.0;
  const auto r = detail::bessel_ik_scaled(nu, x, cfg);
  return detail::finish(r.i, r.i_exp, std::exp(x), "I_nu");
}

inline std::complex<double> bessel_i(double nu, std::complex<double> z, const BesselEvalConfig& cfg = {}) {
  if (z == 0.0) return nu == 0.0 ? 1.0 : 0.0;
  const auto r = detail::bessel_ik_scaled(nu, z, cfg);
  return detail::finish(r.i, r.i_exp, std::exp(z), "I_nu");
}

inline double bessel_k(double nu, double x, const BesselEvalConfig& cfg = {}) {
  const auto r = detail::bessel_ik_scaled(nu, x, cfg);
  return detail::finish(r.k, r.k_exp, std::exp(-x), "K_nu");
}

inline std::complex<double> bessel_k(double nu, std::complex<double> z, const BesselEvalConfig& cfg = {}) {
  const auto r = detail::bessel_ik_scaled(nu, z, cfg);
  return detail::finish(r.k, r.k_exp, std::exp(-z), "K_nu");
}

/// Derivatives I'_nu(x), K'_nu(x).
inline double bessel_i_prime(double nu, double x, const BesselEvalConfig& cfg = {}) {
  const auto r = detail::bessel_ik_scaled(nu, x, cfg);
  return detail::finish(r.di, r.i_exp, std::exp(x), "I'_nu");
}

inline double bessel_k_prime(double nu, double x, const BesselEvalConfig& cfg = {}) {
  const auto r = detail::bessel_ik_scaled(nu, x, cfg);
  return detail::finish(r.dk, r.k_exp, std::exp(-x), "K'_nu");
}

/// I_nu(a) K_nu(b) computed without intermediate overflow; a may be 0.
template <class T>
T bessel_ik_product(double nu, T a, T b, const BesselEvalConfig& cfg = {}) {
  const auto rb = detail::bessel_ik_scaled(nu, b, cfg);
  if (detail::abs_value(a) == 0.0) {
    if (nu != 0.0) return T(0.0);
    return detail::finish(rb.k, rb.k_exp, T(std::exp(-b)), "K_nu");
  }
  const auto ra = detail::bessel_ik_scaled(nu, a, cfg);
  const T prod = ra.i * rb.k;
  const int e = ra.i_exp + rb.k_exp;
  // Guard the mantissa product before applying exponents.
  const T v = detail::scale2(prod, e) * std::exp(a - b);
  if (!std::isfinite(detail::abs_value(v))) throw OverflowError("I_nu K_nu product overflows");
  return v;
}

/// Gamma function for complex s, Lanczos approximation (g = 7) with reflection.
/// Throws PoleError at nonpositive integers; the error carries the residue (-1)^m / m!.
inline std::complex<double> gamma_fn(std::complex<double> s) {
  using cd = std::complex<double>;
  if (s.imag() == 0.0 && s.real() <= 0.0 && s.real() == std::round(s.real())) {
    const int m = static_cast<int>(-s.real());
    const double residue = (m % 2 == 0 ? 1.0 : -1.0) / std::tgamma(m + 1.0);
    throw PoleError("Gamma has a pole at s = " + std::to_string(-m), 1, residue);
  }
  static constexpr std::array<double, 9> p = {0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
                                              771.32342877765313,   -176.61502916214059,   12.507343278686905,
                                              -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  if (s.real() < 0.5) {
    return std::numbers::pi / (std::sin(std::numbers::pi * s) * gamma_fn(1.0 - s));
  }
  const cd z = s - 1.0;
  cd x = p[0];
  for (int i = 1; i < 9; ++i) x += p[i] / (z + static_cast<double>(i));
  const cd t = z + 7.5;
  return std::sqrt(2.0 * std::numbers::pi) * std::exp((z + 0.5) * std::log(t) - t) * x;
}

inline double gamma_fn(double s) { return gamma_fn(std::complex<double>(s, 0.0)).real(); }

/// Taylor coefficient c_k of 1/Gamma(s) = sum_k c_k s^k (k <= 28).
inline double recip_gamma_taylor(int k) {
  if (k < 0 || k >= static_cast<int>(detail::kRecipGammaTaylor.size()))
    throw InvalidArgument("recip_gamma_taylor: index out of range");
  return detail::kRecipGammaTaylor[k];
}

}  // namespace conic
