#pragma once

// Leading-order extraction from sampled boundary approaches, and the heat/resolvent order checks
// built on it.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "conic/cone_model.hpp"
#include "conic/cross_section.hpp"
#include "conic/errors.hpp"
#include "conic/parallel.hpp"

namespace conic {

struct OrderFit {
  double exponent = 0.0;
  int log_power = 0;
  double log_coefficient = 0.0;  // fitted beta of log log(1/rho); near 1 when log_power = 1
  double coefficient = 0.0;      // signed prefactor C in f ~ C rho^exponent (log 1/rho)^log_power
  double quality = 0.0;          // coefficient of determination on the fitted half
  double full_grid_exponent = 0.0;
  std::vector<double> rho;
  std::vector<double> values;
};

struct OrderFitConfig {
  double min_quality = 0.999;
  double consistency_tol = 0.25;   // |exponent(fitted half) - exponent(full grid)|
  double log_beta_tol = 0.25;      // accepted |beta - 1| for a log factor
};

namespace detail {

struct Regression {
  Eigen::VectorXd coef;
  double rss = 0.0;
  double tss = 0.0;
};

inline Regression regress(const std::vector<double>& lr, const std::vector<double>& ly, bool with_log) {
  const Eigen::Index m = static_cast<Eigen::Index>(lr.size());
  Eigen::MatrixXd a(m, with_log ? 3 : 2);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = lr[i];
    if (with_log) a(i, 2) = std::log(-lr[i]);
    b(i) = ly[i];
  }
  Regression r;
  r.coef = a.colPivHouseholderQr().solve(b);
  r.rss = (a * r.coef - b).squaredNorm();
  const double mean = b.mean();
  r.tss = (b.array() - mean).square().sum();
  return r;
}

}  // namespace detail

/// Fits f(rho) ~ C rho^alpha (log 1/rho)^p, p in {0, 1}, as rho -> 0. The regression of log|f| on
/// log rho (and log log(1/rho) when allow_log) uses the smallest-rho half of the grid; the log
/// model is chosen by an Akaike comparison and kept only when its beta is close to 1.
inline OrderFit fit_leading_order(std::vector<double> rho, std::vector<double> f, bool allow_log = false,
                                  const OrderFitConfig& cfg = {}) {
  if (rho.size() != f.size()) throw InvalidArgument("rho and value grids differ in length");
  if (rho.size() < 8) throw InvalidArgument("order fit needs at least 8 samples");
  std::vector<std::size_t> idx(rho.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return rho[a] > rho[b]; });
  OrderFit fit;
  for (std::size_t i : idx) {
    fit.rho.push_back(rho[i]);
    fit.values.push_back(f[i]);
  }
  const double rmax = fit.rho.front(), rmin = fit.rho.back();
  if (!(rmin > 0.0) || !(rmax < 1.0)) throw InvalidArgument("order fit needs 0 < rho < 1");
  if (std::log10(rmax / rmin) < 2.0 - 1e-9) throw InvalidArgument("order fit grid must span at least 2 decades");
  const double sign = fit.values.front() > 0.0 ? 1.0 : -1.0;
  for (double v : fit.values) {
    if (!(v != 0.0) || !std::isfinite(v) || (v > 0.0) != (sign > 0.0)) {
      std::ostringstream msg;
      msg << "no clean order: samples vanish or change sign (value " << v << ")";
      throw FitError(msg.str());
    }
  }
  std::vector<double> lr, ly;
  for (std::size_t i = 0; i < fit.rho.size(); ++i) {
    lr.push_back(std::log(fit.rho[i]));
    ly.push_back(std::log(std::abs(fit.values[i])));
  }
  const std::size_t half = fit.rho.size() / 2;
  const std::vector<double> lr_small(lr.begin() + static_cast<std::ptrdiff_t>(half), lr.end());
  const std::vector<double> ly_small(ly.begin() + static_cast<std::ptrdiff_t>(half), ly.end());
  const double m = static_cast<double>(lr_small.size());

  auto plain = detail::regress(lr_small, ly_small, false);
  auto chosen = plain;
  bool use_log = false;
  if (allow_log) {
    auto logm = detail::regress(lr_small, ly_small, true);
    // Floor the residuals so exact data does not give log(0).
    const double floor = m * 1e-26 * (1.0 + plain.tss);
    const double aic_plain = m * std::log(std::max(plain.rss, floor) / m) + 4.0;
    const double aic_log = m * std::log(std::max(logm.rss, floor) / m) + 6.0;
    if (aic_log < aic_plain && std::abs(logm.coef(2) - 1.0) < cfg.log_beta_tol) {
      chosen = logm;
      use_log = true;
    }
  }
  fit.exponent = chosen.coef(1);
  fit.log_power = use_log ? 1 : 0;
  fit.log_coefficient = use_log ? chosen.coef(2) : 0.0;
  fit.coefficient = sign * std::exp(chosen.coef(0));
  fit.quality = chosen.tss > 0.0 ? 1.0 - chosen.rss / chosen.tss : 1.0;
  fit.full_grid_exponent = detail::regress(lr, ly, use_log).coef(1);

  std::ostringstream diag;
  diag << "exponent " << fit.exponent << ", full-grid exponent " << fit.full_grid_exponent << ", quality "
       << fit.quality;
  if (fit.quality < cfg.min_quality) throw FitError("no clean order: poor fit (" + diag.str() + ")");
  if (std::abs(fit.exponent - fit.full_grid_exponent) > cfg.consistency_tol)
    throw FitError("no clean order: fitted half disagrees with the full grid (" + diag.str() + ")");
  return fit;
}

enum class HeatRegime { zf, lb0, bf0, short_time_diag };

inline const char* regime_name(HeatRegime r) {
  switch (r) {
    case HeatRegime::zf: return "zf";
    case HeatRegime::lb0: return "lb0";
    case HeatRegime::bf0: return "bf0";
    case HeatRegime::short_time_diag: return "short_time_diag";
  }
  return "?";
}

inline HeatRegime parse_regime(const std::string& s) {
  for (HeatRegime r : {HeatRegime::zf, HeatRegime::lb0, HeatRegime::bf0, HeatRegime::short_time_diag})
    if (s == regime_name(r)) return r;
  throw InvalidArgument("unknown regime '" + s + "'");
}

struct OrderCheck {
  std::string regime;
  double expected = 0.0;
  OrderFit fit;
  bool pass = false;
  std::string status;  // "pass", "pass (order at least)" or "fail"
};

inline OrderCheck judge_order(std::string regime, double expected, OrderFit fit, double tol = 0.05) {
  OrderCheck c{std::move(regime), expected, std::move(fit), false, "fail"};
  if (std::abs(c.fit.exponent - expected) <= tol) {
    c.pass = true;
    c.status = "pass";
  } else if (c.fit.exponent > expected) {
    c.pass = true;
    c.status = "pass (order at least)";
  }
  return c;
}

struct HeatPathConfig {
  int samples = 16;
  double rho_max = 1e-1;
  double rho_min = 1e-4;
  double fixed_r = 1.0;        // r of the fixed point p (and of p' on the diagonal paths)
  double fixed_r2 = 2.0;       // r' of the fixed point p' on the zf path
  double section_delta = 0.5;  // cross-section distance between the two points off the diagonal
  ModeSumConfig modes{};
};

/// Heat kernel along the approach path of a face, with the expected order in the path parameter.
///   zf: fixed (p, p'), rho = t^{-1/2}; expected n.
///   lb0: t = a^2, r = a, p' fixed, rho = 1/a; expected n.
///   bf0: t = a^2, r = r' = a, fixed cross-section points, rho = 1/a; expected n.
///   short_time_diag: p = p', rho = sqrt(t) on [10^{-2.5}, 10^{-0.5}]; expected -n.
inline OrderCheck verify_heat_orders(const ConeGeometry& cone, HeatRegime regime, const HeatPathConfig& cfg = {}) {
  const int n = cone.dimension();
  double lo = cfg.rho_min, hi = cfg.rho_max, expected = n;
  if (regime == HeatRegime::short_time_diag) {
    lo = std::pow(10.0, -2.5);
    hi = std::pow(10.0, -0.5);
    expected = -n;
  }
  std::vector<double> rho(static_cast<std::size_t>(cfg.samples)), val(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i)
    rho[i] = hi * std::pow(lo / hi, static_cast<double>(i) / static_cast<double>(rho.size() - 1));
  parallel_for(rho.size(), [&](std::size_t i) {
    const double p = rho[i];
    const double d = cfg.section_delta;
    switch (regime) {
      case HeatRegime::zf:
        val[i] = heat_kernel_mode_sum(cone, 1.0 / (p * p), cfg.fixed_r, cfg.fixed_r2, d, cfg.modes).value;
        break;
      case HeatRegime::lb0: {
        const double a = 1.0 / p;
        val[i] = heat_kernel_mode_sum(cone, a * a, a, cfg.fixed_r, d, cfg.modes).value;
        break;
      }
      case HeatRegime::bf0: {
        const double a = 1.0 / p;
        val[i] = heat_kernel_mode_sum(cone, a * a, a, a, d, cfg.modes).value;
        break;
      }
      case HeatRegime::short_time_diag:
        val[i] = heat_kernel_mode_sum(cone, p * p, cfg.fixed_r, cfg.fixed_r, 0.0, cfg.modes).value;
        break;
    }
  });
  return judge_order(regime_name(regime), expected, fit_leading_order(rho, val, false));
}

struct ResolventOrderReport {
  int n = 0;
  std::vector<double> k;
  std::vector<double> values;      // real part of R(k, p, p')
  double log_coefficient = 0.0;    // slope of R against log k on the smallest-k half
  double expected_log_coefficient = 0.0;
  double finite_part = 0.0;        // limit of R - log_coefficient * log k
  double finite_part_drift = 0.0;  // change of that limit over the last two samples
  bool pass = false;
};

struct ResolventPathConfig {
  int samples = 12;
  double k_max = 1e-2;
  double k_min = 1e-6;
  double r = 1.0, r2 = 2.0, section_delta = 0.5;
  double tolerance = 1e-4;
  ModeSumConfig modes{};
};

/// Small-k behavior of the resolvent at fixed points. For n = 2 the log k coefficient should be
/// -1/V; for n >= 3 the kernel has a finite limit, so the coefficient should vanish.
inline ResolventOrderReport verify_resolvent_orders(const ConeGeometry& cone, const ResolventPathConfig& cfg = {}) {
  ResolventOrderReport rep;
  rep.n = cone.dimension();
  const auto m = static_cast<std::size_t>(cfg.samples);
  if (m < 4) throw InvalidArgument("resolvent order check needs at least 4 samples");
  rep.k.resize(m);
  rep.values.resize(m);
  for (std::size_t i = 0; i < m; ++i)
    rep.k[i] = cfg.k_max * std::pow(cfg.k_min / cfg.k_max, static_cast<double>(i) / static_cast<double>(m - 1));
  parallel_for(m, [&](std::size_t i) {
    rep.values[i] = resolvent_mode_sum(cone, {rep.k[i], 0.0}, cfg.r, cfg.r2, cfg.section_delta, cfg.modes).value.real();
  });
  // Least squares of R on [1, log k] over the smallest-k half.
  const std::size_t h = m / 2;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = h; i < m; ++i) {
    const double x = std::log(rep.k[i]);
    sx += x;
    sy += rep.values[i];
    sxx += x * x;
    sxy += x * rep.values[i];
  }
  const double cnt = static_cast<double>(m - h);
  rep.log_coefficient = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  rep.expected_log_coefficient = rep.n == 2 ? -1.0 / cone.volume() : 0.0;
  auto finite = [&](std::size_t i) { return rep.values[i] - rep.log_coefficient * std::log(rep.k[i]); };
  rep.finite_part = finite(m - 1);
  rep.finite_part_drift = std::abs(finite(m - 1) - finite(m - 2));
  const double scale = std::max(1.0, std::abs(rep.finite_part));
  rep.pass = std::abs(rep.log_coefficient - rep.expected_log_coefficient) < cfg.tolerance &&
             rep.finite_part_drift < cfg.tolerance * scale;
  return rep;
}

inline void write_order_csv(const OrderFit& fit, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
  out.precision(17);
  out << "rho,value\n";
  for (std::size_t i = 0; i < fit.rho.size(); ++i) out << fit.rho[i] << ',' << fit.values[i] << '\n';
}

inline std::string render_order_report(const std::vector<OrderCheck>& checks) {
  std::ostringstream out;
  out << "regime           expected   fitted     status\n";
  char line[160];
  for (const auto& c : checks) {
    std::snprintf(line, sizeof line, "%-16s %-10.4g %-10.4f %s\n", c.regime.c_str(), c.expected, c.fit.exponent,
                  c.status.c_str());
    out << line;
  }
  return out.str();
}

}  // namespace conic
