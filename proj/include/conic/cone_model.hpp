#pragma once

// Heat kernels and resolvents on exact cones by Bessel mode sums, Euclidean closed forms,
// the resolvent-to-heat contour integral, Gaussian upper bounds and the zero-frequency
// matching of the resolvent model.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "conic/cross_section.hpp"
#include "conic/errors.hpp"
#include "conic/parallel.hpp"
#include "conic/quadrature.hpp"
#include "conic/special_functions.hpp"

namespace conic {

struct ConePoint {
  double r = 1.0;
  SectionPoint y;
};

struct ModeSumConfig {
  long max_modes = 2000;
  double tail_tol = 1e-14;
  QuadratureConfig quad{};
  BesselEvalConfig bessel{};
};

template <class T>
struct ModeSumResult {
  T value{};
  double tail_estimate = 0.0;
  std::size_t modes_used = 0;
  double magnitude_sum = 0.0;  // sum of the per-mode bounds, in the units of value
  bool exact_form = false;     // value came from the closed form after cancellation in the sum
};

namespace detail {

// Sums term(j) for j < count. term returns the contribution and a bound on the
// magnitude of that mode for any cross-section point. Stops once a geometric tail
// estimate built from successive bounds drops below tol times the sum of bounds.
template <class T, class Term>
ModeSumResult<T> sum_modes(std::size_t count, double tol, Term&& term, const char* what) {
  ModeSumResult<T> out;
  double bound_sum = 0.0;
  double prev_bound = 0.0;
  for (std::size_t j = 0; j < count; ++j) {
    const auto [value, bound] = term(j);
    out.value += value;
    bound_sum += bound;
    out.modes_used = j + 1;
    out.magnitude_sum = bound_sum;
    if (bound == 0.0 && j > 0) {
      out.tail_estimate = 0.0;
      return out;
    }
    if (j > 0 && prev_bound > 0.0) {
      const double q = bound / prev_bound;
      if (q < 1.0) {
        const double tail = bound * q / (1.0 - q);
        if (tail <= tol * bound_sum) {
          out.tail_estimate = tail;
          return out;
        }
      }
    }
    prev_bound = bound;
  }
  throw TruncationError(std::string(what) + ": mode sum not converged after " + std::to_string(count) + " modes",
                        prev_bound);
}

inline std::size_t usable_modes(const ConeGeometry& cone, const ModeSumConfig& cfg) {
  if (cfg.max_modes < 1) throw InvalidArgument("max_modes must be at least 1");
  if (!(cfg.tail_tol > 0.0 && cfg.tail_tol < 1.0)) throw InvalidArgument("tail_tol must lie in (0, 1)");
  return std::min<std::size_t>(static_cast<std::size_t>(cfg.max_modes), cone.mode_count());
}

}  // namespace detail

/// Euclidean heat kernel (4 pi t)^{-n/2} e^{-d^2/4t}.
inline double euclidean_heat(int n, double t, double d) {
  if (!(t > 0.0)) throw InvalidArgument("euclidean_heat needs t > 0");
  if (!(d >= 0.0)) throw InvalidArgument("euclidean_heat needs d >= 0");
  return std::pow(4.0 * std::numbers::pi * t, -0.5 * n) * std::exp(-d * d / (4.0 * t));
}

namespace detail {

// Heat kernel of the cone over a circle of length L in closed form: direct and reflected
// Gaussians for every image angle delta + mL inside (-pi, pi), plus the diffraction integral
// obtained from Schlafli's integral for I_nu. Returns false next to a shadow boundary
// (an image angle at +-pi), where the diffraction integrand becomes singular, or when the
// diffraction quadrature does not converge.
inline bool circle_cone_heat_exact(double len, double t, double r, double r2, double delta, double& out) {
  constexpr double pi = std::numbers::pi;
  const double alpha = 2.0 * pi / len;
  const double b1 = alpha * (pi + delta), b2 = alpha * (pi - delta);
  // 1 - cos b and cosh(alpha u) - cos b in cancellation-free form.
  const double h1 = 2.0 * std::pow(std::sin(0.5 * b1), 2), h2 = 2.0 * std::pow(std::sin(0.5 * b2), 2);
  // An image exactly on the shadow boundary |delta + mL| = pi counts with weight 1/2, and its
  // diffraction term vanishes as a principal value. Close to the boundary (but not on it) the
  // integrand is too sharply peaked and the caller keeps the mode sum.
  constexpr double on_boundary = 1e-22, near_boundary = 1e-9;
  const bool drop1 = h1 < on_boundary, drop2 = h2 < on_boundary;
  if ((!drop1 && h1 < near_boundary) || (!drop2 && h2 < near_boundary)) return false;
  double images = 0.0;
  const long m_lo = static_cast<long>(std::floor((-pi - delta) / len));
  const long m_hi = static_cast<long>(std::ceil((pi - delta) / len));
  for (long m = m_lo; m <= m_hi; ++m) {
    const double a = delta + static_cast<double>(m) * len;
    const double edge = std::abs(std::abs(a) - pi);
    const double weight = edge < 1e-10 ? ((drop1 || drop2) ? 0.5 : 0.0) : (std::abs(a) < pi ? 1.0 : 0.0);
    if (weight > 0.0) images += weight * std::exp(-(r * r + r2 * r2 - 2.0 * r * r2 * std::cos(a)) / (4.0 * t));
  }
  images /= 4.0 * pi * t;
  const double x = r * r2 / (2.0 * t);
  const double scale = std::exp(-(r + r2) * (r + r2) / (4.0 * t)) / (2.0 * pi * t * len);
  const double s1 = drop1 ? 0.0 : std::sin(b1), s2 = drop2 ? 0.0 : std::sin(b2);
  const double dmax = (drop1 ? 0.0 : std::abs(s1) / (2.0 * h1)) + (drop2 ? 0.0 : std::abs(s2) / (2.0 * h2));
  if (scale * dmax * bessel_k_scaled(0.0, x) < 1e-17 * images) {
    out = images;
    return true;
  }
  auto diffraction = [&](double u) {
    const double sh = 2.0 * std::pow(std::sinh(0.5 * alpha * u), 2);
    const double d = (drop1 ? 0.0 : s1 / (2.0 * (sh + h1))) + (drop2 ? 0.0 : s2 / (2.0 * (sh + h2)));
    return std::exp(-2.0 * x * std::pow(std::sinh(0.5 * u), 2)) * d;
  };
  QuadratureConfig q;
  q.rel_tol = 1e-13;
  q.abs_tol = std::max(1e-15 * images / scale, 1e-300);
  try {
    out = images - scale * integrate_semi_infinite(diffraction, 0.0, q).value;
  } catch (const ConvergenceError&) {
    return false;
  }
  return true;
}

}  // namespace detail

/// Heat kernel at cross-section distance delta between radii r and r2, with its tail estimate.
/// When the terms cancel to below 1e-4 of their magnitude, rounding would dominate the
/// result; built-in cross-sections then switch to their exact form (image sum and
/// diffraction integral for a circle, the Euclidean kernel for a round sphere).
inline ModeSumResult<double> heat_kernel_mode_sum(const ConeGeometry& cone, double t, double r, double r2,
                                                  double delta, const ModeSumConfig& cfg = {}) {
  if (!(t > 0.0)) throw InvalidArgument("heat kernel needs t > 0");
  if (!(r > 0.0) || !(r2 > 0.0)) throw InvalidArgument("cone points need r > 0");
  const std::size_t count = detail::usable_modes(cone, cfg);
  std::vector<double> kernels;
  cone.mode_kernels(delta, count, kernels);
  const int n = cone.dimension();
  const double x = r * r2 / (2.0 * t);
  const double diff = r - r2;
  const double radial = std::exp(-diff * diff / (4.0 * t)) / (2.0 * t);
  const double weight = std::pow(r * r2, -0.5 * (n - 2));
  const auto& roots = cone.roots();
  const double vol = cone.volume();
  auto sum = detail::sum_modes<double>(
      count, cfg.tail_tol,
      [&](std::size_t j) {
        const double g = bessel_i_scaled(roots[j].nu, x, cfg.bessel);
        return std::pair<double, double>{kernels[j] * g, roots[j].multiplicity / vol * g};
      },
      "heat kernel");
  sum.value *= radial * weight;
  sum.tail_estimate *= radial * weight;
  sum.magnitude_sum *= radial * weight;
  if (std::abs(sum.value) < 1e-4 * sum.magnitude_sum) {
    const auto& spec = cone.spectrum();
    double exact = 0.0;
    if (spec.source == SpectrumSource::sphere) {
      sum.value = euclidean_heat(n, t, ConeGeometry::cone_distance(r, r2, delta));
      sum.exact_form = true;
    } else if (spec.source == SpectrumSource::circle &&
               detail::circle_cone_heat_exact(spec.circle_length, t, r, r2, delta, exact)) {
      sum.value = exact;
      sum.exact_form = true;
    }
  }
  return sum;
}

/// H(t, p, p') = (r r')^{-(n-2)/2} sum_j Pi_j(y, y') (1/2t) e^{-(r^2 + r'^2)/4t} I_{nu_j}(r r'/2t).
inline double heat_kernel_cone(const ConeGeometry& cone, double t, const ConePoint& p, const ConePoint& p2,
                               const ModeSumConfig& cfg = {}) {
  return heat_kernel_mode_sum(cone, t, p.r, p2.r, cone.section_distance(p.y, p2.y), cfg).value;
}

/// Resolvent kernel at cross-section distance delta, with its tail estimate.
inline ModeSumResult<std::complex<double>> resolvent_mode_sum(const ConeGeometry& cone, std::complex<double> k,
                                                              double r, double r2, double delta,
                                                              const ModeSumConfig& cfg = {}) {
  if (!(k.real() > 0.0)) throw InvalidArgument("resolvent needs Re k > 0");
  if (!(r > 0.0) || !(r2 > 0.0)) throw InvalidArgument("cone points need r > 0");
  if (r == r2 && delta == 0.0) throw SingularityError("resolvent kernel is singular on the diagonal");
  const std::size_t count = detail::usable_modes(cone, cfg);
  std::vector<double> kernels;
  cone.mode_kernels(delta, count, kernels);
  const int n = cone.dimension();
  const double lo = std::min(r, r2), hi = std::max(r, r2);
  const double weight = std::pow(r * r2, -0.5 * (n - 2));
  const auto& roots = cone.roots();
  const double vol = cone.volume();
  using cd = std::complex<double>;
  auto sum = detail::sum_modes<cd>(
      count, cfg.tail_tol,
      [&](std::size_t j) {
        const cd ik = bessel_ik_product(roots[j].nu, k * lo, k * hi, cfg.bessel);
        return std::pair<cd, double>{kernels[j] * ik, roots[j].multiplicity / vol * std::abs(ik)};
      },
      "resolvent");
  sum.value *= weight;
  sum.tail_estimate *= weight;
  return sum;
}

/// Kernel of (Delta + k^2)^{-1}: (r r')^{-(n-2)/2} sum_j Pi_j(y, y') I_{nu_j}(k r_<) K_{nu_j}(k r_>).
inline std::complex<double> resolvent_cone(const ConeGeometry& cone, std::complex<double> k, const ConePoint& p,
                                           const ConePoint& p2, const ModeSumConfig& cfg = {}) {
  return resolvent_mode_sum(cone, k, p.r, p2.r, cone.section_distance(p.y, p2.y), cfg).value;
}

/// Planar resolvent kernel (1/2 pi) K_0(k d).
inline double euclidean_resolvent_2d(double k, double d) {
  if (!(k > 0.0)) throw InvalidArgument("euclidean_resolvent_2d needs k > 0");
  if (!(d > 0.0)) throw SingularityError("planar resolvent is singular at d = 0");
  return bessel_k(0.0, k * d) / (2.0 * std::numbers::pi);
}

struct ContourSpec {
  double phi = 0.75 * std::numbers::pi;
  double a = 1.0;
  double r_max = 0.0;
  int arc_panels = 6;
  int ray_panels = 14;
  int order = 20;
};

/// Contour for time t: arc radius 1/t, rays cut where e^{t rho cos phi} < 1e-16.
inline ContourSpec contour_for_time(double t, double phi = 0.75 * std::numbers::pi) {
  ContourSpec c;
  c.phi = phi;
  c.a = 1.0 / t;
  c.r_max = std::log(1e16) / (t * std::abs(std::cos(phi)));
  return c;
}

inline void validate_contour(const ContourSpec& c) {
  if (!(c.phi > 0.5 * std::numbers::pi && c.phi < std::numbers::pi))
    throw ContourError("contour angle phi must lie in (pi/2, pi)");
  if (!(std::cos(c.phi) < 0.0)) throw ContourError("contour rays do not decay: cos(phi) >= 0");
  if (!(c.a > 0.0)) throw ContourError("contour arc radius must be positive");
  if (!(c.r_max > c.a)) throw ContourError("ray truncation must exceed the arc radius");
  if (c.arc_panels < 1 || c.ray_panels < 1 || c.order < 2) throw ContourError("contour quadrature too coarse");
}

/// (1/2 pi i) times the integral of e^{lambda t} R(sqrt(lambda)) along the counterclockwise
/// contour: lower ray inward, arc through the positive axis, upper ray outward.
/// `resolvent` maps k (Re k > 0) to the kernel value.
template <class Resolvent>
std::complex<double> contour_integral(Resolvent&& resolvent, double t, const ContourSpec& c) {
  validate_contour(c);
  if (!(t > 0.0)) throw InvalidArgument("contour integral needs t > 0");
  using cd = std::complex<double>;
  const cd up = std::polar(1.0, c.phi);
  const cd down = std::conj(up);
  // Panels graded toward the arc; the far end is where the integrand is exponentially small.
  std::vector<double> ray_breaks(c.ray_panels + 1);
  const double grade = 1.2;
  const double norm = std::pow(grade, c.ray_panels) - 1.0;
  for (int i = 0; i <= c.ray_panels; ++i)
    ray_breaks[i] = c.a + (c.r_max - c.a) * (std::pow(grade, i) - 1.0) / norm;
  ray_breaks.back() = c.r_max;
  auto ray = [&](double rho) -> cd {
    const cd lu = rho * up, ld = rho * down;
    const cd fu = std::exp(lu * t) * resolvent(std::sqrt(lu));
    const cd fd = std::exp(ld * t) * resolvent(std::sqrt(ld));
    return up * fu - down * fd;
  };
  const cd rays = integrate_panels(ray, ray_breaks, c.order);
  std::vector<double> arc_breaks(c.arc_panels + 1);
  for (int i = 0; i <= c.arc_panels; ++i) arc_breaks[i] = -c.phi + 2.0 * c.phi * i / c.arc_panels;
  auto arc = [&](double theta) -> cd {
    const cd lam = std::polar(c.a, theta);
    return cd(0.0, 1.0) * lam * std::exp(lam * t) * resolvent(std::sqrt(lam));
  };
  const cd arcs = integrate_panels(arc, arc_breaks, c.order);
  return (rays + arcs) / cd(0.0, 2.0 * std::numbers::pi);
}

/// Heat kernel recovered from the resolvent by the functional-calculus contour integral.
inline std::complex<double> heat_from_resolvent_contour(const ConeGeometry& cone, double t, const ConePoint& p,
                                                        const ConePoint& p2, const ContourSpec& contour,
                                                        const ModeSumConfig& cfg = {}) {
  const double delta = cone.section_distance(p.y, p2.y);
  auto res = [&](std::complex<double> k) { return resolvent_mode_sum(cone, k, p.r, p2.r, delta, cfg).value; };
  return contour_integral(res, t, contour);
}

struct HeatSample {
  double t = 1.0;
  ConePoint p, p2;
};

struct GaussianBoundFit {
  double c1 = std::numeric_limits<double>::infinity();
  double c2 = 0.0;
  std::vector<std::pair<double, double>> sweep;  // (C2, smallest admissible C1)
  std::vector<std::size_t> violations;           // sample indices breaking the chosen bound
  bool certified = false;
};

/// Smallest C1 with H <= C1 t^{-n/2} e^{-d^2 / (C2 t)} on every sample, for each C2 in the
/// ascending candidate list. The chosen pair is the first C2 with finite C1 not above c1_cap.
inline GaussianBoundFit gaussian_bound_fit(const ConeGeometry& cone, const std::vector<HeatSample>& samples,
                                           std::vector<double> c2_candidates = {4.0, 4.5, 5.0, 6.0, 8.0, 12.0, 16.0},
                                           double c1_cap = 1e6, const ModeSumConfig& cfg = {}) {
  std::sort(c2_candidates.begin(), c2_candidates.end());
  const int n = cone.dimension();
  std::vector<double> heat(samples.size()), dist(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    const auto& s = samples[i];
    heat[i] = heat_kernel_cone(cone, s.t, s.p, s.p2, cfg);
    dist[i] = ConeGeometry::cone_distance(s.p.r, s.p2.r, cone.section_distance(s.p.y, s.p2.y));
  });
  GaussianBoundFit fit;
  for (double c2 : c2_candidates) {
    double c1 = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double t = samples[i].t;
      const double need = heat[i] * std::pow(t, 0.5 * n) * std::exp(dist[i] * dist[i] / (c2 * t));
      c1 = std::isfinite(need) ? std::max(c1, need) : std::numeric_limits<double>::infinity();
    }
    fit.sweep.emplace_back(c2, c1);
    if (!fit.certified && std::isfinite(c1) && c1 <= c1_cap) {
      fit.c1 = c1;
      fit.c2 = c2;
      fit.certified = true;
    }
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double t = samples[i].t;
    const bool positive = heat[i] > 0.0 && std::isfinite(heat[i]);
    const double bound = fit.c1 * std::pow(t, -0.5 * n) * std::exp(-dist[i] * dist[i] / (fit.c2 * t));
    if (!positive || !fit.certified || heat[i] > bound * (1.0 + 1e-12)) fit.violations.push_back(i);
  }
  if (!fit.violations.empty()) fit.certified = false;
  return fit;
}

/// Bessel model at the corner face: Q(kappa, sigma) = sum_j Pi_j I_nu(kappa_<) K_nu(kappa_>) for a
/// two-dimensional cone, where kappa_< = kappa min(1, sigma) and kappa_> = kappa max(1, sigma).
inline double bf0_model(const ConeGeometry& cone, double kappa, double sigma, double delta,
                        const ModeSumConfig& cfg = {}) {
  if (cone.dimension() != 2) throw InvalidGeometry("the corner model is implemented for n = 2");
  return resolvent_mode_sum(cone, {kappa, 0.0}, 1.0, sigma, delta, cfg).value.real();
}

/// Leading small-kappa prediction V^{-1}(-log kappa_> + log 2 - gamma) + sum_{j>=1} Pi_j e^{-nu_j |log sigma|} / (2 nu_j).
inline double bf0_zf_prediction(const ConeGeometry& cone, double kappa, double sigma, double delta,
                                const ModeSumConfig& cfg = {}) {
  if (!(sigma > 0.0) || sigma == 1.0) throw InvalidArgument("prediction needs sigma > 0, sigma != 1");
  const double big = kappa * std::max(1.0, sigma);
  const double head = (-std::log(big) + std::numbers::ln2 - kEulerGamma) / cone.volume();
  return head + [&] {
    const std::size_t count = detail::usable_modes(cone, cfg);
    std::vector<double> kernels;
    cone.mode_kernels(delta, count, kernels);
    const double ls = std::abs(std::log(sigma));
    const auto& roots = cone.roots();
    auto sum = detail::sum_modes<double>(
        count, cfg.tail_tol,
        [&](std::size_t j) {
          if (j == 0) return std::pair<double, double>{0.0, 0.0};
          const double g = std::exp(-roots[j].nu * ls) / (2.0 * roots[j].nu);
          return std::pair<double, double>{kernels[j] * g, roots[j].multiplicity / cone.volume() * g};
        },
        "zero-frequency prediction");
    return sum.value;
  }();
}

struct MatchingReport {
  std::vector<double> kappas;
  std::vector<double> max_rel_residual;  // per kappa, over the sigma grid
  double max_deviation = 0.0;            // at the smallest kappa
  double log_coefficient = 0.0;          // d Q / d log kappa from the two smallest kappas
};

/// Compares the corner model with its zero-frequency prediction on a (kappa, sigma) grid.
inline MatchingReport verify_bf0_zf_matching(const ConeGeometry& cone, std::vector<double> kappas,
                                             const std::vector<double>& sigmas, double delta = 0.0,
                                             const ModeSumConfig& cfg = {}) {
  if (kappas.size() < 2 || sigmas.empty()) throw InvalidArgument("matching grid needs >= 2 kappas and a sigma");
  std::sort(kappas.begin(), kappas.end(), std::greater<>());
  MatchingReport rep;
  rep.kappas = kappas;
  for (double kappa : kappas) {
    double worst = 0.0;
    for (double sigma : sigmas) {
      const double q = bf0_model(cone, kappa, sigma, delta, cfg);
      const double pred = bf0_zf_prediction(cone, kappa, sigma, delta, cfg);
      worst = std::max(worst, std::abs(q - pred) / std::abs(pred));
    }
    rep.max_rel_residual.push_back(worst);
  }
  rep.max_deviation = rep.max_rel_residual.back();
  const double k1 = kappas[kappas.size() - 2], k2 = kappas.back();
  const double s = sigmas.front();
  rep.log_coefficient =
      (bf0_model(cone, k1, s, delta, cfg) - bf0_model(cone, k2, s, delta, cfg)) / (std::log(k1) - std::log(k2));
  return rep;
}

}  // namespace conic
