#pragma once

// Cutoff heat traces on conic ends, their divergent expansion in the cutoff scale delta,
// and the renormalized (finite-part) heat trace.
//
// Everything reduces to the integrated diagonal density G(s) = int_N H(s, 1, y, 1, y) dy,
// because by homogeneity the truncated trace at scale delta and time t is
//   T(delta, t) = core(t) + (1/2) int_{delta^2 t}^{t} G(s) ds / s,
//   core(t)     = (1/2) int_t^inf G(s) ds / s.
// G is evaluated by its mode sum for s >= s_switch and by its fitted short-time expansion
// sum_k a_k s^{(k-n)/2} below, where the mode sum would need impractically many modes.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "conic/cone_model.hpp"
#include "conic/cross_section.hpp"
#include "conic/errors.hpp"
#include "conic/quadrature.hpp"

namespace conic {

/// Cutoff profile chi_1. Sharp is the indicator of [0, 1]; smooth is a C-infinity step in
/// log r from 1 at r <= lo down to 0 at r >= hi, with 1/2 <= lo < hi <= 2.
struct Cutoff {
  enum class Kind { sharp, smooth };
  Kind kind = Kind::sharp;
  double lo = 0.5;
  double hi = 2.0;

  static Cutoff sharp() { return {}; }
  static Cutoff smooth(double lo = 0.5, double hi = 2.0) {
    if (!(lo >= 0.5 && hi <= 2.0 && lo < hi)) throw InvalidArgument("smooth cutoff needs 1/2 <= lo < hi <= 2");
    return {Kind::smooth, lo, hi};
  }

  double operator()(double r) const {
    if (kind == Kind::sharp) return r <= 1.0 ? 1.0 : 0.0;
    if (r <= lo) return 1.0;
    if (r >= hi) return 0.0;
    return 1.0 - step(position(r));
  }

  /// d chi_1 / dr (zero for the sharp profile away from r = 1).
  double derivative(double r) const {
    if (kind == Kind::sharp || r <= lo || r >= hi) return 0.0;
    const double u = position(r);
    return -step_derivative(u) / (r * std::log(hi / lo));
  }

 private:
  double position(double r) const { return std::log(r / lo) / std::log(hi / lo); }
  static double psi(double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; }
  static double step(double u) {
    const double a = psi(u), b = psi(1.0 - u);
    return a / (a + b);
  }
  static double step_derivative(double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    const double a = psi(u), b = psi(1.0 - u);
    const double da = a / (u * u), db = -b / ((1.0 - u) * (1.0 - u));
    return (da * b - a * db) / ((a + b) * (a + b));
  }
};

struct CutoffMoments {
  std::vector<double> l;         // l_k = -int chi' r^{n-k} dr, k < n
  double l_log = 0.0;            // -int chi' log r dr
  std::vector<double> l_stated;  // variant with r^{k-n}
};

/// Moments of -chi_1' that rescale the divergent coefficients under a change of cutoff.
inline CutoffMoments cutoff_moments(const Cutoff& chi, int n) {
  CutoffMoments m;
  if (chi.kind == Cutoff::Kind::sharp) {
    m.l.assign(n, 1.0);
    m.l_stated.assign(n, 1.0);
    return m;
  }
  QuadratureConfig q;
  q.rel_tol = 1e-14;
  q.abs_tol = 1e-16;
  for (int k = 0; k < n; ++k) {
    m.l.push_back(
        integrate_adaptive([&](double r) { return -chi.derivative(r) * std::pow(r, n - k); }, chi.lo, chi.hi, q).value);
    m.l_stated.push_back(
        integrate_adaptive([&](double r) { return -chi.derivative(r) * std::pow(r, k - n); }, chi.lo, chi.hi, q).value);
  }
  m.l_log = integrate_adaptive([&](double r) { return -chi.derivative(r) * std::log(r); }, chi.lo, chi.hi, q).value;
  return m;
}

/// Integrated diagonal density of the source: G(s) and an optional replacement for core(t).
/// A user-supplied core models a compact perturbation inside r <= 1 of an exact cone.
struct TraceSource {
  int n = 2;
  std::function<double(double)> density;
  std::function<double(double)> core;
  std::string label;
};

/// G(s) = sum_j m_j (1/2s) e^{-x} I_{nu_j}(x), x = 1/(2s). Needs multiplicities only.
inline double diagonal_trace_density(const ConeGeometry& cone, double s, const ModeSumConfig& cfg = {}) {
  if (!(s > 0.0)) throw InvalidArgument("trace density needs s > 0");
  const double x = 0.5 / s;
  const auto& roots = cone.roots();
  const std::size_t count = detail::usable_modes(cone, cfg);
  auto sum = detail::sum_modes<double>(
      count, cfg.tail_tol,
      [&](std::size_t j) {
        const double g = roots[j].multiplicity * bessel_i_scaled(roots[j].nu, x, cfg.bessel);
        return std::pair<double, double>{g, g};
      },
      "trace density");
  return sum.value / (2.0 * s);
}

inline TraceSource cone_trace_source(const ConeGeometry& cone, const ModeSumConfig& cfg = {}) {
  auto shared = std::make_shared<const ConeGeometry>(cone);
  TraceSource src;
  src.n = cone.dimension();
  src.density = [shared, cfg](double s) { return diagonal_trace_density(*shared, s, cfg); };
  src.label = "cone";
  return src;
}

struct HeatCoefficients {
  std::vector<double> a;  // a_k for k = 0..n, coefficient of s^{(k-n)/2}
  double relative_residual = 0.0;
};

struct RenormConfig {
  double s_switch = 2e-3;
  double fit_s_max = 4e-2;
  int fit_points = 24;
  double fit_residual_threshold = 1e-7;
  QuadratureConfig quad{1e-14, 1e-300, 4000};
};

namespace detail {

struct LeastSquares {
  Eigen::VectorXd coef;
  double condition = 0.0;
};

// Solves min ||A c - b|| after unit column scaling; throws when the scaled matrix is near singular.
inline LeastSquares solve_least_squares(Eigen::MatrixXd a, const Eigen::VectorXd& b, double max_condition,
                                        const std::string& hint) {
  Eigen::VectorXd scale(a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    scale(j) = a.col(j).norm();
    if (scale(j) == 0.0) throw ConditioningError("design matrix has a zero column; " + hint);
    a.col(j) /= scale(j);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  LeastSquares out;
  out.condition = sv(0) / sv(sv.size() - 1);
  if (!(out.condition < max_condition)) {
    std::ostringstream msg;
    msg << "ill-conditioned design matrix (condition " << out.condition << "); " << hint;
    throw ConditioningError(msg.str());
  }
  out.coef = a.colPivHouseholderQr().solve(b);
  for (Eigen::Index j = 0; j < a.cols(); ++j) out.coef(j) /= scale(j);
  return out;
}

}  // namespace detail

/// Fits G(s) on a small-s grid against s^{(k-n)/2}, k = 0..n.
inline HeatCoefficients fit_heat_coefficients(const TraceSource& src, const std::vector<double>& s_grid,
                                              double residual_threshold = 1e-7) {
  const int n = src.n;
  if (s_grid.size() < static_cast<std::size_t>(n + 3)) throw InvalidArgument("heat coefficient fit needs >= n + 3 points");
  const Eigen::Index rows = static_cast<Eigen::Index>(s_grid.size());
  Eigen::MatrixXd a(rows, n + 1);
  Eigen::VectorXd b(rows), g(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double s = s_grid[i];
    if (!(s > 0.0)) throw InvalidArgument("heat coefficient grid must be positive");
    g(i) = src.density(s);
    const double w = 1.0 / std::abs(g(i));
    for (int k = 0; k <= n; ++k) a(i, k) = w * std::pow(s, 0.5 * (k - n));
    b(i) = w * g(i);
  }
  const auto ls = detail::solve_least_squares(a, b, 1e12, "widen the s grid");
  HeatCoefficients hc;
  hc.a.assign(ls.coef.data(), ls.coef.data() + ls.coef.size());
  const Eigen::VectorXd res = a * ls.coef - b;
  hc.relative_residual = res.cwiseAbs().maxCoeff();
  if (hc.relative_residual > residual_threshold) {
    std::ostringstream msg;
    msg << "short-time fit residual " << hc.relative_residual << " exceeds " << residual_threshold
        << "; the s grid reaches outside the expansion regime (lower s_max)";
    throw FitError(msg.str());
  }
  return hc;
}

inline std::vector<double> geometric_grid(double lo, double hi, int count) {
  if (count < 2 || !(lo > 0.0) || !(hi > lo)) throw InvalidArgument("geometric grid needs 0 < lo < hi and >= 2 points");
  std::vector<double> g(count);
  for (int i = 0; i < count; ++i) g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
  return g;
}

/// Truncated traces for one source. Thread-safe: the only mutable state is a mutex-guarded cache.
class TraceIntegrator {
 public:
  TraceIntegrator(TraceSource src, RenormConfig cfg = {}) : src_(std::move(src)), cfg_(cfg) {
    if (src_.n < 2) throw InvalidGeometry("trace source dimension must be at least 2");
    if (!src_.density) throw InvalidArgument("trace source needs a density");
    coeffs_ = fit_heat_coefficients(src_, geometric_grid(cfg_.s_switch, cfg_.fit_s_max, cfg_.fit_points),
                                    cfg_.fit_residual_threshold);
    f_switch_ = upper_integral(cfg_.s_switch);
  }

  int dimension() const { return src_.n; }
  const HeatCoefficients& coefficients() const { return coeffs_; }
  const RenormConfig& config() const { return cfg_; }
  const TraceSource& source() const { return src_; }

  /// G(s): mode sum above the switch, short-time expansion below.
  double density(double s) const { return s >= cfg_.s_switch ? src_.density(s) : expansion(s); }

  double expansion(double s) const {
    double g = 0.0;
    for (int k = 0; k <= src_.n; ++k) g += coeffs_.a[k] * std::pow(s, 0.5 * (k - src_.n));
    return g;
  }

  /// F(sigma) = (1/2) int_sigma^inf G(s) ds / s.
  double tail(double sigma) const {
    if (!(sigma > 0.0)) throw InvalidArgument("tail integral needs sigma > 0");
    const double sw = cfg_.s_switch;
    const int n = src_.n;
    if (sigma < sw) {
      double v = f_switch_;
      for (int k = 0; k < n; ++k)
        v += coeffs_.a[k] * (std::pow(sw, 0.5 * (k - n)) - std::pow(sigma, 0.5 * (k - n))) / (k - n);
      return v + 0.5 * coeffs_.a[n] * std::log(sw / sigma);
    }
    // Whole panels of fixed width in log s are cached; the partial panel is integrated fresh.
    // The result does not depend on which tails were requested before.
    const double usw = std::log(sw);
    const double u = std::log(sigma);
    const auto whole = static_cast<std::size_t>(std::floor((u - usw) / kPanelWidth));
    double v = f_switch_ - panel_prefix(whole);
    const double u_start = usw + static_cast<double>(whole) * kPanelWidth;
    if (u > u_start) v -= half_log_integral(u_start, u);
    return v;
  }

  /// Contribution of r <= 1.
  double core(double t) const {
    if (!(t > 0.0)) throw InvalidArgument("core trace needs t > 0");
    return src_.core ? src_.core(t) : tail(t);
  }

  /// Trace of the heat kernel against chi_1(delta r).
  double truncated_trace(double t, double delta, const Cutoff& chi) const {
    if (!(delta > 0.0 && delta < 0.5)) throw InvalidArgument("cutoff scale delta must lie in (0, 1/2)");
    if (!(t > 0.0)) throw InvalidArgument("truncated trace needs t > 0");
    const double base = core(t) - tail(t);
    if (chi.kind == Cutoff::Kind::sharp) return base + tail(delta * delta * t);
    // chi_1(delta sqrt(t/s)) is 1 for s >= delta^2 t / lo^2 and 0 for s <= delta^2 t / hi^2.
    const double s_full = delta * delta * t / (chi.lo * chi.lo);
    const double s_zero = delta * delta * t / (chi.hi * chi.hi);
    auto weighted = [&](double u) {
      const double s = std::exp(u);
      return 0.5 * chi(delta * std::sqrt(t / s)) * density(s);
    };
    std::vector<double> breaks = {std::log(s_zero), std::log(s_full)};
    if (cfg_.s_switch > s_zero && cfg_.s_switch < s_full) breaks.insert(breaks.begin() + 1, std::log(cfg_.s_switch));
    double transition = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
      transition += integrate_adaptive(weighted, breaks[i], breaks[i + 1], cfg_.quad).value;
    return base + tail(s_full) + transition;
  }

 private:
  // (1/2) int_{u0}^{u1} G(e^u) du, split at the switch so each piece is smooth.
  double half_log_integral(double u0, double u1) const {
    auto f = [&](double u) { return 0.5 * density(std::exp(u)); };
    const double usw = std::log(cfg_.s_switch);
    double v = 0.0;
    if (u0 < usw && u1 > usw) {
      v += integrate_adaptive(f, u0, usw, cfg_.quad).value;
      u0 = usw;
    }
    // Short panels keep the adaptive rule from resolving the whole range at once.
    for (double a = u0; a < u1;) {
      const double b = std::min(u1, a + 2.0);
      v += integrate_adaptive(f, a, b, cfg_.quad).value;
      a = b;
    }
    return v;
  }

  // (1/2) int_sigma^inf G ds / s. With a user-supplied core only differences of tails are
  // used, so the upper limit is anchored at s = 1 and G need not decay.
  double upper_integral(double sigma) const {
    if (src_.core) return half_log_integral(std::log(sigma), 0.0);
    const double s1 = std::max(1e3, 10.0 * sigma);
    double v = half_log_integral(std::log(sigma), std::log(s1));
    v += integrate_semi_infinite([&](double s) { return 0.5 * src_.density(s) / s; }, s1, cfg_.quad).value;
    return v;
  }

  static constexpr double kPanelWidth = 0.5;

  // Sum of the first `count` panel integrals above the switch.
  double panel_prefix(std::size_t count) const {
    std::vector<double> missing;
    std::size_t have = 0;
    {
      std::lock_guard<std::mutex> lock(cache_guard_);
      have = std::min(count, panels_.size());
    }
    const double usw = std::log(cfg_.s_switch);
    for (std::size_t i = have; i < count; ++i) {
      const double a = usw + static_cast<double>(i) * kPanelWidth;
      missing.push_back(half_log_integral(a, a + kPanelWidth));
    }
    std::lock_guard<std::mutex> lock(cache_guard_);
    for (std::size_t i = have; i < count; ++i)
      if (i >= panels_.size()) panels_.push_back(missing[i - have]);
    double v = 0.0;
    for (std::size_t i = 0; i < count; ++i) v += panels_[i];
    return v;
  }

  TraceSource src_;
  RenormConfig cfg_;
  HeatCoefficients coeffs_;
  double f_switch_ = 0.0;
  mutable std::mutex cache_guard_;
  mutable std::vector<double> panels_;
};

inline double truncated_trace_cone(const ConeGeometry& cone, double t, double delta, const Cutoff& chi,
                                   const ModeSumConfig& cfg = {}, const RenormConfig& rcfg = {}) {
  return TraceIntegrator(cone_trace_source(cone, cfg), rcfg).truncated_trace(t, delta, chi);
}

struct TraceSweep {
  double t = 1.0;
  std::vector<double> delta;
  std::vector<double> values;
  Cutoff cutoff;
};

/// delta in {2^-3, ..., 2^-20}.
/// Eighteen dyadic scales with delta^2 t <= 1/64, where the short-time expansion of the
/// density is accurate to near machine precision for the tested cones.
inline std::vector<double> default_delta_grid(double t = 1.0) {
  const int e0 = std::max(3, static_cast<int>(std::ceil(0.5 * std::log2(64.0 * t))));
  std::vector<double> g;
  for (int e = e0; e <= e0 + 17; ++e) g.push_back(std::ldexp(1.0, -e));
  return g;
}

inline TraceSweep trace_sweep(const TraceIntegrator& integ, double t, const Cutoff& chi,
                              std::vector<double> deltas = {}) {
  TraceSweep sw;
  sw.t = t;
  sw.cutoff = chi;
  sw.delta = deltas.empty() ? default_delta_grid(t) : std::move(deltas);
  sw.values.resize(sw.delta.size());
  parallel_for(sw.delta.size(), [&](std::size_t i) { sw.values[i] = integ.truncated_trace(t, sw.delta[i], chi); });
  return sw;
}

struct DivergentExpansion {
  int n = 2;
  std::vector<double> f;  // coefficient of delta^{k-n}, k < n
  double f_log = 0.0;
  double finite_part = 0.0;
  double residual_norm = 0.0;
  double condition = 0.0;

  double evaluate(double delta) const {
    double v = finite_part + f_log * std::log(delta);
    for (int k = 0; k < n; ++k) v += f[k] * std::pow(delta, k - n);
    return v;
  }
};

/// Least-squares fit of a sweep against delta^{k-n} (k < n), log delta and 1.
/// Rows are weighted by delta^n so every sample contributes at its own scale.
inline DivergentExpansion fit_divergent_expansion(const TraceSweep& sweep, int n) {
  const std::size_t m = sweep.delta.size();
  if (m != sweep.values.size()) throw InvalidArgument("sweep delta and value lengths differ");
  const std::string hint = "use a geometric delta grid such as 2^-3 ... 2^-20 (>= n + 3 points over >= 3 decades)";
  if (m < static_cast<std::size_t>(n + 3)) throw ConditioningError("too few sweep points; " + hint);
  const auto [lo, hi] = std::minmax_element(sweep.delta.begin(), sweep.delta.end());
  if (std::log10(*hi / *lo) < 3.0) throw ConditioningError("sweep spans fewer than 3 decades; " + hint);
  Eigen::MatrixXd a(m, n + 2);
  Eigen::VectorXd b(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double d = sweep.delta[i];
    if (!(d > 0.0 && d < 0.5)) throw InvalidArgument("sweep delta must lie in (0, 1/2)");
    if (!std::isfinite(sweep.values[i])) throw InvalidArgument("sweep value is not finite");
    const double w = std::pow(d, n);
    for (int k = 0; k < n; ++k) a(i, k) = w * std::pow(d, k - n);
    a(i, n) = w * std::log(d);
    a(i, n + 1) = w;
    b(i) = w * sweep.values[i];
  }
  const auto ls = detail::solve_least_squares(a, b, 1e12, hint);
  DivergentExpansion e;
  e.n = n;
  e.f.assign(ls.coef.data(), ls.coef.data() + n);
  e.f_log = ls.coef(n);
  e.finite_part = ls.coef(n + 1);
  e.condition = ls.condition;
  for (std::size_t i = 0; i < m; ++i)
    e.residual_norm = std::max(e.residual_norm, std::abs(e.evaluate(sweep.delta[i]) - sweep.values[i]));
  return e;
}

inline DivergentExpansion renormalized_expansion(const TraceIntegrator& integ, double t,
                                                 const Cutoff& chi = Cutoff::sharp()) {
  return fit_divergent_expansion(trace_sweep(integ, t, chi), integ.dimension());
}

/// Finite part at delta = 0 of the sharp-cutoff trace.
inline double renormalized_trace(const TraceIntegrator& integ, double t) {
  return renormalized_expansion(integ, t).finite_part;
}

inline double renormalized_trace(const ConeGeometry& cone, double t, const ModeSumConfig& cfg = {},
                                 const RenormConfig& rcfg = {}) {
  return renormalized_trace(TraceIntegrator(cone_trace_source(cone, cfg), rcfg), t);
}

struct PredictedCoefficients {
  std::vector<double> f_stated;     // a_k t^{(k-n)/2} / (k - n)
  std::vector<double> f_corrected;  // -a_k t^{(k-n)/2} / (k - n)
  double f_log = 0.0;               // -a_n
};

inline PredictedCoefficients predicted_divergent_coefficients(const HeatCoefficients& hc, int n, double t) {
  if (hc.a.size() < static_cast<std::size_t>(n + 1)) throw InvalidArgument("need heat coefficients a_0..a_n");
  PredictedCoefficients p;
  for (int k = 0; k < n; ++k) {
    const double v = hc.a[k] * std::pow(t, 0.5 * (k - n)) / (k - n);
    p.f_stated.push_back(v);
    p.f_corrected.push_back(-v);
  }
  p.f_log = -hc.a[n];
  return p;
}

struct CutoffComparison {
  DivergentExpansion sharp, smooth;
  CutoffMoments moments;
  double coefficient_deviation = 0.0;   // max_k |f_k^smooth - l_k f_k^sharp| / max_j |f_j^sharp|
  double log_deviation = 0.0;           // |f_log^smooth - f_log^sharp|
  double finite_part_shift = 0.0;       // FP_smooth - FP_sharp
  double predicted_shift = 0.0;         // -l_log f_log
  double stated_shift = 0.0;            // +l_log f_log
  double shift_deviation = 0.0;         // |measured - predicted|
  double stated_shift_deviation = 0.0;  // |measured - stated|
  double max_deviation = 0.0;
};

/// Sharp versus smooth cutoff at time t.
inline CutoffComparison compare_cutoffs(const TraceIntegrator& integ, double t, const Cutoff& smooth) {
  const int n = integ.dimension();
  CutoffComparison c;
  c.sharp = renormalized_expansion(integ, t, Cutoff::sharp());
  c.smooth = renormalized_expansion(integ, t, smooth);
  c.moments = cutoff_moments(smooth, n);
  double scale = 1e-300;
  for (int k = 0; k < n; ++k) scale = std::max(scale, std::abs(c.sharp.f[k]));
  for (int k = 0; k < n; ++k) {
    const double want = c.moments.l[k] * c.sharp.f[k];
    c.coefficient_deviation = std::max(c.coefficient_deviation, std::abs(c.smooth.f[k] - want) / scale);
  }
  c.log_deviation = std::abs(c.smooth.f_log - c.sharp.f_log);
  c.finite_part_shift = c.smooth.finite_part - c.sharp.finite_part;
  c.predicted_shift = -c.moments.l_log * c.sharp.f_log;
  c.stated_shift = c.moments.l_log * c.sharp.f_log;
  c.shift_deviation = std::abs(c.finite_part_shift - c.predicted_shift);
  c.stated_shift_deviation = std::abs(c.finite_part_shift - c.stated_shift);
  c.max_deviation = std::max({c.coefficient_deviation, c.log_deviation, c.shift_deviation});
  return c;
}

inline void write_sweep_csv(std::ostream& os, const TraceSweep& sw) {
  os << "delta,value\n";
  char buf[64];
  for (std::size_t i = 0; i < sw.delta.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,", sw.delta[i]);
    os << buf;
    std::snprintf(buf, sizeof buf, "%.17g\n", sw.values[i]);
    os << buf;
  }
}

inline void write_expansion_csv(std::ostream& os, const DivergentExpansion& e) {
  os << "term,exponent,logpower,coefficient\n";
  char buf[96];
  for (int k = 0; k < e.n; ++k) {
    std::snprintf(buf, sizeof buf, "f%d,%d,0,%.17g\n", k, k - e.n, e.f[k]);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "f_log,0,1,%.17g\n", e.f_log);
  os << buf;
  std::snprintf(buf, sizeof buf, "finite_part,0,0,%.17g\n", e.finite_part);
  os << buf;
}

}  // namespace conic
