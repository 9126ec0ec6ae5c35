#pragma once

// Renormalized zeta function by Mellin transform of a renormalized heat trace, continued
// meromorphically by splitting at t = 1, and the determinant exp(-zeta'(0)).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "conic/errors.hpp"
#include "conic/quadrature.hpp"
#include "conic/renormalization.hpp"
#include "conic/special_functions.hpp"

namespace conic {

/// One term a t^z (log t)^p.
struct PhgTerm {
  double z = 0.0;
  int p = 0;
  double a = 0.0;
};

/// Finite polyhomogeneous expansion; the remainder is O(x^remainder_order) in its variable.
struct PhgExpansion {
  std::vector<PhgTerm> terms;
  double remainder_order = std::numeric_limits<double>::infinity();

  double evaluate(double x) const {
    double v = 0.0;
    const double lx = std::log(x);
    for (const auto& t : terms) v += t.a * std::pow(x, t.z) * std::pow(lx, t.p);
    return v;
  }
};

/// int_0^1 t^{z+s-1} (log t)^p dt = (-1)^p p! / (s+z)^{p+1}, continued off Re(s+z) > 0.
inline std::complex<double> mellin_term(double z, int p, std::complex<double> s) {
  if (p < 0) throw InvalidArgument("log power must be nonnegative");
  const std::complex<double> w = s + z;
  double fact = 1.0;
  for (int i = 2; i <= p; ++i) fact *= i;
  const double sign = (p % 2 == 0) ? 1.0 : -1.0;
  if (w == 0.0) throw PoleError("mellin_term has a pole at s = -z", p + 1, sign * fact);
  return sign * fact / std::pow(w, p + 1);
}

/// 1/Gamma(s), zero at the nonpositive integers.
inline std::complex<double> recip_gamma(std::complex<double> s) {
  if (s.imag() == 0.0 && s.real() <= 0.0 && s.real() == std::round(s.real())) return 0.0;
  return 1.0 / gamma_fn(s);
}

struct TraceModelOptions {
  int order = 12;           // Gauss points per panel
  double max_panel = 0.5;   // panel width in log t
};

/// Trace = short expansion near t = 0, long expansion in u = 1/t near infinity, and an
/// optional exact trace on [t_lo, t_hi] whose differences from the expansions are the
/// numeric remainders. Outside [t_lo, t_hi] the expansions are taken as exact.
class TraceModel {
 public:
  TraceModel() { build_nodes(); }

  TraceModel(PhgExpansion short_exp, PhgExpansion long_exp, std::function<double(double)> trace = {},
             double t_lo = 1e-2, double t_hi = 1e2, TraceModelOptions opt = {})
      : short_(std::move(short_exp)), long_(std::move(long_exp)), trace_(std::move(trace)), t_lo_(t_lo),
        t_hi_(t_hi), opt_(opt) {
    if (trace_ && !(t_lo_ > 0.0 && t_lo_ < 1.0 && t_hi_ > 2.0))
      throw InvalidArgument("numeric remainder window must satisfy 0 < t_lo < 1 and t_hi > 2");
    build_nodes();
  }

  const PhgExpansion& short_expansion() const { return short_; }
  const PhgExpansion& long_expansion() const { return long_; }
  bool has_remainder() const { return static_cast<bool>(trace_); }
  double t_lo() const { return t_lo_; }
  double t_hi() const { return t_hi_; }

  /// Model value: the exact trace inside the window, the expansions outside.
  double evaluate(double t) const {
    if (trace_ && t >= t_lo_ && t <= t_hi_) return trace_(t);
    return t < 1.0 ? short_.evaluate(t) : long_.evaluate(1.0 / t);
  }

  /// Jumps at the window edges between the exact trace and the expansions.
  double splice_gap_lo() const { return trace_ ? std::abs(trace_(t_lo_) - short_.evaluate(t_lo_)) : 0.0; }
  double splice_gap_hi() const { return trace_ ? std::abs(trace_(t_hi_) - long_.evaluate(1.0 / t_hi_)) : 0.0; }

  /// Adds a constant to both expansions and to the exact trace.
  TraceModel plus_constant(double c) const {
    TraceModel m = *this;
    m.short_.terms.push_back({0.0, 0, c});
    m.long_.terms.push_back({0.0, 0, c});
    if (trace_) {
      auto f = trace_;
      m.trace_ = [f, c](double t) { return f(t) + c; };
    }
    return m;
  }

  struct Node {
    double log_t, weight, rem_short, rem_long;
  };
  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  void build_nodes() {
    nodes_.clear();
    if (!trace_) return;
    std::vector<double> breaks = {std::log(t_lo_), 0.0, std::numbers::ln2, std::log(t_hi_)};
    const GaussRule& rule = gauss_legendre(opt_.order);
    for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
      const int pieces = std::max(1, static_cast<int>(std::ceil((breaks[b + 1] - breaks[b]) / opt_.max_panel)));
      const double h = (breaks[b + 1] - breaks[b]) / pieces;
      for (int k = 0; k < pieces; ++k) {
        const double c = breaks[b] + (k + 0.5) * h;
        for (int i = 0; i < opt_.order; ++i) {
          const double v = c + 0.5 * h * rule.nodes[i];
          const double t = std::exp(v);
          const double tr = trace_(t);
          nodes_.push_back({v, 0.5 * h * rule.weights[i], tr - short_.evaluate(t), tr - long_.evaluate(1.0 / t)});
        }
      }
    }
  }

  PhgExpansion short_, long_;
  std::function<double(double)> trace_;
  double t_lo_ = 1e-2, t_hi_ = 1e2;
  TraceModelOptions opt_;
  std::vector<Node> nodes_;
};

inline TraceModel constant_trace_model(double c) {
  return TraceModel(PhgExpansion{{{0.0, 0, c}}}, PhgExpansion{{{0.0, 0, c}}});
}

/// sum_j m_j e^{-lambda_j t}: Taylor expansion at t = 0 of the given order, no long expansion
/// beyond the zero modes, and the exact trace as remainder.
inline TraceModel mock_spectrum_model(const std::vector<SpectrumEntry>& spectrum, int taylor_order = 12,
                                      double t_lo = 1e-2) {
  if (spectrum.empty()) throw InvalidArgument("mock spectrum is empty");
  double lam_min = std::numeric_limits<double>::infinity();
  double zero_modes = 0.0;
  for (const auto& e : spectrum) {
    if (e.lambda < 0.0 || e.multiplicity < 1) throw InvalidArgument("mock spectrum needs lambda >= 0, m >= 1");
    if (e.lambda == 0.0)
      zero_modes += e.multiplicity;
    else
      lam_min = std::min(lam_min, e.lambda);
  }
  PhgExpansion shortx, longx;
  double fact = 1.0;
  for (int k = 0; k <= taylor_order; ++k) {
    if (k > 0) fact *= k;
    double c = 0.0;
    for (const auto& e : spectrum) c += e.multiplicity * std::pow(-e.lambda, k);
    shortx.terms.push_back({static_cast<double>(k), 0, c / fact});
  }
  shortx.remainder_order = taylor_order + 1;
  if (zero_modes > 0.0) longx.terms.push_back({0.0, 0, zero_modes});
  const double t_hi = std::isfinite(lam_min) ? std::max(4.0, 60.0 / lam_min) : 4.0;
  auto spec = spectrum;
  auto trace = [spec](double t) {
    double v = 0.0;
    for (const auto& e : spec) v += e.multiplicity * std::exp(-e.lambda * t);
    return v;
  };
  return TraceModel(std::move(shortx), std::move(longx), trace, t_lo, t_hi);
}

struct ZetaPole {
  double location = 0.0;
  int order = 0;
  double leading = 0.0;  // coefficient of (s - location)^{-order} of zeta
};

struct LaurentData {
  double residue = 0.0;
  double value = 0.0;
  double derivative = 0.0;
};

namespace detail {

// Coefficients c[j - lowest] of sum_j c_j e^j.
struct Laurent {
  int lowest = 0;
  std::vector<double> c;

  double at(int power) const {
    const int i = power - lowest;
    return (i >= 0 && i < static_cast<int>(c.size())) ? c[i] : 0.0;
  }
  void add(int power, double v) {
    if (c.empty()) {
      lowest = power;
      c.push_back(0.0);
    }
    if (power < lowest) {
      c.insert(c.begin(), lowest - power, 0.0);
      lowest = power;
    }
    const int i = power - lowest;
    if (i >= static_cast<int>(c.size())) c.resize(i + 1, 0.0);
    c[i] += v;
  }
};

inline double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline double factorial(int p) {
  double f = 1.0;
  for (int i = 2; i <= p; ++i) f *= i;
  return f;
}

// Laurent expansion in e = s - s0 of a (-1)^p p! / (sign_s * s + z)^{p+1}, up to e^top.
inline void add_term_laurent(Laurent& out, const PhgTerm& term, double s0, double sign_s, int top) {
  const int p = term.p;
  const double pre = term.a * ((p % 2 == 0) ? 1.0 : -1.0) * factorial(p);
  const double w = sign_s * s0 + term.z;  // base = w + sign_s e
  if (std::abs(w) < 1e-12) {
    out.add(-(p + 1), pre / std::pow(sign_s, p + 1));
    return;
  }
  // (w + sign_s e)^{-(p+1)} = sum_m binom(-(p+1), m) w^{-(p+1)-m} (sign_s e)^m
  for (int m = 0; m <= top; ++m) {
    const double coef = ((m % 2 == 0) ? 1.0 : -1.0) * binom(p + m, m) * std::pow(w, -(p + 1) - m) * std::pow(sign_s, m);
    out.add(m, pre * coef);
  }
}

// Taylor coefficients of 1/Gamma(s0 + e) for s0 a nonpositive integer, up to e^top.
inline std::vector<double> recip_gamma_series_at(int s0, int top) {
  const int m0 = -s0;
  // 1/Gamma(e + 1 - m0) ... written as e * prod_{i=1}^{m0} (e - i) * 1/Gamma(e + 1).
  std::vector<double> poly = {0.0, 1.0};  // e
  for (int i = 1; i <= m0; ++i) {
    std::vector<double> next(poly.size() + 1, 0.0);
    for (std::size_t k = 0; k < poly.size(); ++k) {
      next[k + 1] += poly[k];
      next[k] -= i * poly[k];
    }
    poly = next;
  }
  // 1/Gamma(e + 1) = sum_{k>=1} c_k e^{k-1}
  std::vector<double> g(top + 1, 0.0);
  for (int k = 0; k <= top; ++k)
    for (std::size_t j = 0; j < poly.size() && static_cast<int>(j) <= k; ++j)
      g[k] += poly[j] * recip_gamma_taylor(k - static_cast<int>(j) + 1);
  return g;
}

}  // namespace detail

/// Laurent data of zeta at s0 in {0, -1, -2, ...}: coefficients of e^{-1}, e^0, e^1.
inline LaurentData zeta_laurent_at(const TraceModel& model, int s0) {
  if (s0 > 0) throw InvalidArgument("Laurent expansion is provided at nonpositive integers");
  const int top = 3;
  detail::Laurent f;
  for (const auto& t : model.short_expansion().terms) detail::add_term_laurent(f, t, s0, 1.0, top);
  for (const auto& t : model.long_expansion().terms) detail::add_term_laurent(f, t, s0, -1.0, top);
  // Numeric remainders: sum_i w_i rem_i t_i^{s0} (e log t_i)^m / m!.
  for (const auto& nd : model.nodes()) {
    const double rem = nd.log_t < 0.0 ? nd.rem_short : nd.rem_long;
    double pw = nd.weight * rem * std::exp(s0 * nd.log_t);
    for (int m = 0; m <= top; ++m) {
      f.add(m, pw);
      pw *= nd.log_t / (m + 1);
    }
  }
  const auto g = detail::recip_gamma_series_at(s0, top + 4);
  auto zeta_coef = [&](int power) {
    double v = 0.0;
    for (int k = 0; k < static_cast<int>(g.size()); ++k) v += g[k] * f.at(power - k);
    return v;
  };
  for (int power = f.lowest; power < -1; ++power) {
    const double c = zeta_coef(power);
    if (std::abs(c) > 1e-12) {
      std::ostringstream msg;
      msg << "zeta has a pole of order " << -power << " at s = " << s0;
      throw PoleError(msg.str(), -power, c);
    }
  }
  return {zeta_coef(-1), zeta_coef(0), zeta_coef(1)};
}

inline LaurentData zeta_laurent_at_zero(const TraceModel& model) { return zeta_laurent_at(model, 0); }

/// Poles of zeta: candidate locations from the expansion terms, after cancellation between
/// terms and against the zeros of 1/Gamma.
inline std::vector<ZetaPole> zeta_poles(const TraceModel& model) {
  std::vector<double> cands;
  for (const auto& t : model.short_expansion().terms) cands.push_back(-t.z);
  for (const auto& t : model.long_expansion().terms) cands.push_back(t.z);
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
              cands.end());
  std::vector<ZetaPole> poles;
  for (double s0 : cands) {
    detail::Laurent f;
    for (const auto& t : model.short_expansion().terms)
      if (std::abs(s0 + t.z) < 1e-12) detail::add_term_laurent(f, t, s0, 1.0, -1);
    for (const auto& t : model.long_expansion().terms)
      if (std::abs(t.z - s0) < 1e-12) detail::add_term_laurent(f, t, s0, -1.0, -1);
    int order = 0;
    double lead = 0.0;
    for (int power = f.lowest; power < 0; ++power) {
      if (std::abs(f.at(power)) > 1e-12) {
        order = -power;
        lead = f.at(power);
        break;
      }
    }
    if (order == 0) continue;
    const bool gamma_zero = s0 <= 0.0 && std::abs(s0 - std::round(s0)) < 1e-12;
    if (gamma_zero) {
      const auto g = detail::recip_gamma_series_at(static_cast<int>(std::round(s0)), 1);
      order -= 1;
      lead *= g[1];
    } else {
      lead *= recip_gamma(s0).real();
    }
    if (order > 0) poles.push_back({s0, order, lead});
  }
  return poles;
}

/// zeta(s) = (1/Gamma(s)) int_0^inf Tr(t) t^{s-1} dt with the split at t = split (1 by default;
/// any value in {1, 2} is supported since both are quadrature breakpoints).
inline std::complex<double> renormalized_zeta(const TraceModel& model, std::complex<double> s, double split = 1.0) {
  using cd = std::complex<double>;
  if (split != 1.0 && split != 2.0) throw InvalidArgument("split point must be 1 or 2");
  for (const auto& pole : zeta_poles(model)) {
    if (std::abs(s - pole.location) < 1e-8) {
      std::ostringstream msg;
      msg << "s is within 1e-8 of a pole at " << pole.location << "; use the Laurent expansion instead";
      throw PoleError(msg.str(), pole.order, pole.leading);
    }
  }
  // Removable points: nonpositive integers where 1/Gamma vanishes against a pole of the integral.
  if (std::abs(s.imag()) < 1e-8 && s.real() < 1e-8 && std::abs(s.real() - std::round(s.real())) < 1e-8) {
    const int s0 = static_cast<int>(std::round(s.real()));
    bool singular = false;
    for (const auto& t : model.short_expansion().terms) singular |= std::abs(s0 + t.z) < 1e-12;
    for (const auto& t : model.long_expansion().terms) singular |= std::abs(t.z - s0) < 1e-12;
    if (singular) {
      const auto l = zeta_laurent_at(model, s0);
      const cd e = s - static_cast<double>(s0);
      return l.value + l.derivative * e;
    }
  }
  const double log_split = std::log(split);
  cd total = 0.0;
  // Short terms over [0, split]: X^w sum_q C(p,q) (log X)^{p-q} mellin(z, q, s).
  for (const auto& t : model.short_expansion().terms) {
    cd acc = 0.0;
    for (int q = 0; q <= t.p; ++q)
      acc += detail::binom(t.p, q) * std::pow(log_split, t.p - q) * mellin_term(t.z, q, s);
    total += t.a * std::exp((t.z + s) * log_split) * acc;
  }
  // Long terms over [split, inf) in u = 1/t: X = 1/split, exponent z - s.
  for (const auto& t : model.long_expansion().terms) {
    cd acc = 0.0;
    for (int q = 0; q <= t.p; ++q)
      acc += detail::binom(t.p, q) * std::pow(-log_split, t.p - q) * mellin_term(t.z, q, -s);
    total += t.a * std::exp(-(t.z - s) * log_split) * acc;
  }
  for (const auto& nd : model.nodes()) {
    const double rem = nd.log_t < log_split ? nd.rem_short : nd.rem_long;
    total += nd.weight * rem * std::exp(s * nd.log_t);
  }
  return recip_gamma(s) * total;
}

struct ZetaResult {
  LaurentData laurent_at_0;
  std::vector<ZetaPole> poles;
  std::vector<std::pair<std::complex<double>, std::complex<double>>> samples;
};

inline ZetaResult zeta_report(const TraceModel& model, const std::vector<std::complex<double>>& query) {
  ZetaResult r;
  r.laurent_at_0 = zeta_laurent_at_zero(model);
  r.poles = zeta_poles(model);
  for (const auto& s : query) r.samples.emplace_back(s, renormalized_zeta(model, s));
  return r;
}

/// log det = -zeta'(0); refused when zeta has a pole at 0.
inline double log_renormalized_det(const TraceModel& model, double residue_tol = 1e-9) {
  const auto l = zeta_laurent_at_zero(model);
  if (std::abs(l.residue) > residue_tol)
    throw UndefinedDeterminant("zeta has a pole at s = 0; the determinant is undefined", l.residue);
  return -l.derivative;
}

struct ConeModelConfig {
  double short_lo = 1e-3, short_hi = 1e-1;
  double long_lo = 1e1, long_hi = 1e3;
  int samples = 12;
  int short_powers = 4;  // t^{j/2}, j = 0..short_powers
  int long_powers = 2;   // u^j, j = 0..long_powers
  double fit_tolerance = 1e-8;
  double t_lo = 1e-2, t_hi = 1e2;
};

namespace detail {

struct PhgFit {
  PhgExpansion expansion;
  double residual = 0.0;
};

inline PhgFit fit_phg_once(const std::vector<std::pair<double, int>>& lattice, const std::vector<double>& x,
                           const std::vector<double>& y, const char* where) {
  Eigen::MatrixXd a(x.size(), lattice.size());
  Eigen::VectorXd b(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < lattice.size(); ++j)
      a(i, j) = std::pow(x[i], lattice[j].first) * std::pow(std::log(x[i]), lattice[j].second);
    b(i) = y[i];
  }
  const auto ls = solve_least_squares(a, b, 1e13, std::string("trace model fit near ") + where);
  PhgFit out;
  for (std::size_t j = 0; j < lattice.size(); ++j)
    out.expansion.terms.push_back({lattice[j].first, lattice[j].second, ls.coef(j)});
  for (std::size_t i = 0; i < x.size(); ++i)
    out.residual = std::max(out.residual, std::abs(out.expansion.evaluate(x[i]) - y[i]));
  return out;
}

// Least squares on the lattice, then backward elimination: a term is dropped while the fit
// without it still meets the tolerance. The constant term (first lattice entry) is kept.
inline PhgExpansion fit_phg(std::vector<std::pair<double, int>> lattice, const std::vector<double>& x,
                            const std::vector<double>& y, double tol, const char* where) {
  double scale = 1.0;
  for (double v : y) scale = std::max(scale, std::abs(v));
  PhgFit best = fit_phg_once(lattice, x, y, where);
  if (best.residual > tol * scale) {
    std::ostringstream msg;
    msg << "trace model rejected near " << where << ": fit residual " << best.residual << " exceeds "
        << tol * scale;
    throw FitError(msg.str());
  }
  while (lattice.size() > 1) {
    std::size_t drop = 0;
    PhgFit candidate;
    candidate.residual = std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j < lattice.size(); ++j) {
      auto trial = lattice;
      trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(j));
      PhgFit f = fit_phg_once(trial, x, y, where);
      if (f.residual < candidate.residual) {
        candidate = std::move(f);
        drop = j;
      }
    }
    if (!(candidate.residual <= tol * scale)) break;
    lattice.erase(lattice.begin() + static_cast<std::ptrdiff_t>(drop));
    best = std::move(candidate);
  }
  std::sort(best.expansion.terms.begin(), best.expansion.terms.end(),
            [](const PhgTerm& a, const PhgTerm& b) { return a.z != b.z ? a.z < b.z : a.p < b.p; });
  return best.expansion;
}

}  // namespace detail

/// Trace model of the renormalized heat trace of a cone: half-integer powers (and log t) at
/// t = 0, integer powers of 1/t (and log) at infinity, the trace itself in between.
inline TraceModel build_trace_model_from_cone(std::shared_ptr<const TraceIntegrator> integ,
                                              const ConeModelConfig& cfg = {}) {
  const int n = integ->dimension();
  auto rtrace = [integ](double t) { return renormalized_trace(*integ, t); };
  const bool with_log = n == 2 || std::abs(integ->coefficients().a[n]) > 1e-10;
  std::vector<std::pair<double, int>> short_lat, long_lat;
  for (int j = 0; j <= cfg.short_powers; ++j) short_lat.push_back({0.5 * j, 0});
  for (int j = 0; j <= cfg.long_powers; ++j) long_lat.push_back({static_cast<double>(j), 0});
  if (with_log) {
    short_lat.push_back({0.0, 1});
    long_lat.push_back({0.0, 1});
  }
  const auto ts = geometric_grid(cfg.short_lo, cfg.short_hi, cfg.samples);
  const auto tl = geometric_grid(cfg.long_lo, cfg.long_hi, cfg.samples);
  std::vector<double> ys, yl, ul;
  for (double t : ts) ys.push_back(rtrace(t));
  for (double t : tl) {
    yl.push_back(rtrace(t));
    ul.push_back(1.0 / t);
  }
  auto shortx = detail::fit_phg(short_lat, ts, ys, cfg.fit_tolerance, "t = 0");
  auto longx = detail::fit_phg(long_lat, ul, yl, cfg.fit_tolerance, "t = infinity");
  shortx.remainder_order = 0.5 * (cfg.short_powers + 1);
  longx.remainder_order = cfg.long_powers + 1;
  return TraceModel(std::move(shortx), std::move(longx), rtrace, cfg.t_lo, cfg.t_hi);
}

inline TraceModel build_trace_model_from_cone(const ConeGeometry& cone, const ConeModelConfig& cfg = {},
                                              const ModeSumConfig& modes = {}, const RenormConfig& rcfg = {}) {
  return build_trace_model_from_cone(std::make_shared<const TraceIntegrator>(cone_trace_source(cone, modes), rcfg), cfg);
}

}  // namespace conic
