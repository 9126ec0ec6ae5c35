#pragma once

// Adaptive Gauss-Kronrod integration and Gauss-Legendre panel rules.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <type_traits>
#include <utility>
#include <vector>

#include "conic/errors.hpp"

namespace conic {

struct QuadratureConfig {
  double rel_tol = 1e-12;
  double abs_tol = 1e-15;
  int max_subdivisions = 2000;
};

template <class R>
struct QuadratureResult {
  R value{};
  double error = 0.0;
  int intervals = 0;
};

namespace detail {

inline double magnitude(double v) { return std::abs(v); }
inline double magnitude(const std::complex<double>& v) { return std::abs(v); }

// 21-point Kronrod extension of the 10-point Gauss rule (abscissae descending, centre last).
inline constexpr std::array<double, 11> kKronrodNodes = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0};
inline constexpr std::array<double, 11> kKronrodWeights = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077600525048486, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
// Gauss weights attach to the odd-indexed Kronrod nodes 1, 3, 5, 7, 9.
inline constexpr std::array<double, 5> kGaussWeights = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

template <class R, class F>
std::pair<R, double> kronrod21(F& f, double a, double b) {
  const double centre = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  R fc = f(centre);
  R kron = fc * kKronrodWeights[10];
  R gauss{};
  for (std::size_t j = 0; j < 10; ++j) {
    const double dx = half * kKronrodNodes[j];
    const R sum = f(centre - dx) + f(centre + dx);
    kron += sum * kKronrodWeights[j];
    if (j % 2 == 1) gauss += sum * kGaussWeights[j / 2];
  }
  kron *= half;
  gauss *= half;
  return {kron, magnitude(kron - gauss)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (G10/K21) quadrature of f over [a, b].
///
/// Works for real- and complex-valued integrands. Endpoint singularities that
/// are integrable (log t, t^{-1/2}) are handled by bisection because no node
/// sits on an endpoint. Interval selection is deterministic: the interval with
/// the largest error estimate is split, ties broken by creation order.
template <class F>
auto integrate_adaptive(F&& f, double a, double b, const QuadratureConfig& cfg = {})
    -> QuadratureResult<std::decay_t<std::invoke_result_t<F&, double>>> {
  using R = std::decay_t<std::invoke_result_t<F&, double>>;
  QuadratureResult<R> out;
  if (a == b) return out;
  double sign = 1.0;
  if (b < a) {
    std::swap(a, b);
    sign = -1.0;
  }

  struct Piece {
    double lo, hi;
    R value;
    double err;
    long id;
  };
  std::vector<Piece> pieces;
  long next_id = 0;
  auto [v0, e0] = detail::kronrod21<R>(f, a, b);
  pieces.push_back({a, b, v0, e0, next_id++});
  R total = v0;
  double total_err = e0;

  for (int iter = 0;; ++iter) {
    const double target = std::max(cfg.rel_tol * detail::magnitude(total), cfg.abs_tol);
    if (total_err <= target) break;
    auto worst = std::max_element(pieces.begin(), pieces.end(), [](const Piece& x, const Piece& y) {
      if (x.err != y.err) return x.err < y.err;
      return x.id > y.id;
    });
    if (iter >= cfg.max_subdivisions || worst->hi - worst->lo <= 1e-14 * (std::abs(worst->lo) + 1e-300)) {
      std::ostringstream msg;
      msg.precision(6);
      msg << "adaptive quadrature did not converge: error " << total_err << " > target " << target
          << ", worst interval [" << worst->lo << ", " << worst->hi << "] with error " << worst->err;
      throw ConvergenceError(msg.str());
    }
    const Piece w = *worst;
    pieces.erase(worst);
    const double mid = 0.5 * (w.lo + w.hi);
    auto [vl, el] = detail::kronrod21<R>(f, w.lo, mid);
    auto [vr, er] = detail::kronrod21<R>(f, mid, w.hi);
    pieces.push_back({w.lo, mid, vl, el, next_id++});
    pieces.push_back({mid, w.hi, vr, er, next_id++});
    // Re-sum in left-to-right order so the result does not depend on the refinement history
    // beyond the final partition.
    std::sort(pieces.begin(), pieces.end(), [](const Piece& x, const Piece& y) { return x.lo < y.lo; });
    total = R{};
    total_err = 0.0;
    for (const auto& p : pieces) {
      total += p.value;
      total_err += p.err;
    }
  }
  out.value = total * sign;
  out.error = total_err;
  out.intervals = static_cast<int>(pieces.size());
  return out;
}

/// Integral over [a, infinity) through the map x = a + u / (1 - u).
/// The integrand must decay fast enough that the mapped integrand is finite at u -> 1.
template <class F>
auto integrate_semi_infinite(F&& f, double a, const QuadratureConfig& cfg = {}) {
  using R = std::decay_t<std::invoke_result_t<F&, double>>;
  auto mapped = [&](double u) -> R {
    const double one_minus = 1.0 - u;
    const double x = a + u / one_minus;
    if (!std::isfinite(x)) return R{};
    return f(x) * (1.0 / (one_minus * one_minus));
  };
  return integrate_adaptive(mapped, 0.0, 1.0, cfg);
}

/// n-point Gauss-Legendre rule on [-1, 1] (nodes ascending). Cached per n.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline const GaussRule& gauss_legendre(int n) {
  static std::mutex guard;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(guard);
  if (auto it = cache.find(n); it != cache.end()) return it->second;
  if (n < 1) throw InvalidArgument("gauss_legendre: n must be positive");
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
    }
    dp = n * (x * p0 - p1) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

/// Composite Gauss-Legendre over consecutive breakpoints.
template <class F>
auto integrate_panels(F&& f, const std::vector<double>& breaks, int order) {
  using R = std::decay_t<std::invoke_result_t<F&, double>>;
  const GaussRule& rule = gauss_legendre(order);
  R total{};
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const double c = 0.5 * (breaks[p] + breaks[p + 1]);
    const double h = 0.5 * (breaks[p + 1] - breaks[p]);
    R panel{};
    for (int i = 0; i < order; ++i) panel += f(c + h * rule.nodes[i]) * rule.weights[i];
    total += panel * h;
  }
  return total;
}

}  // namespace conic
