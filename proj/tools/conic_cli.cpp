// conic: config-driven experiments on exact cones.
//
//   conic <command> CONFIG.json [--set section.key=value]... [--out-dir DIR]
//
// Commands: spectrum, heat, resolvent, rtrace, zeta, det, verify (--suite NAME).
// Exit codes: 0 success (all checks passed), 1 numeric failure, 2 configuration error.

#include <cinttypes>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "conic/asymptotic_lab.hpp"
#include "conic/cone_model.hpp"
#include "conic/cross_section.hpp"
#include "conic/errors.hpp"
#include "conic/index_calculus.hpp"
#include "conic/renormalization.hpp"
#include "conic/version.hpp"
#include "conic/zeta_det.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using cd = std::complex<double>;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumeric = 1;
constexpr int kExitConfig = 2;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Short form for thresholds in reports.
std::string brief(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

// ---------------------------------------------------------------------------------------------
// Config access

class Section {
 public:
  Section(const json& root, const std::string& name, bool required) : name_(name) {
    if (!root.contains(name)) {
      if (required) throw ConfigError("missing required section '" + name + "'");
      node_ = json::object();
      return;
    }
    node_ = root.at(name);
    if (!node_.is_object()) throw ConfigError("section '" + name + "' must be an object");
  }

  // Rejects keys outside the allowed set.
  void allow(const std::set<std::string>& keys) const {
    for (const auto& [k, v] : node_.items())
      if (!keys.count(k)) throw ConfigError("unknown key '" + name_ + "." + k + "'");
  }

  bool has(const std::string& key) const { return node_.contains(key); }
  const json& raw(const std::string& key) const {
    if (!has(key)) throw ConfigError("missing required key '" + name_ + "." + key + "'");
    return node_.at(key);
  }

  double number(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError("'" + name_ + "." + key + "' must be a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  long integer(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError("'" + name_ + "." + key + "' must be an integer");
    return v.get<long>();
  }
  long integer(const std::string& key, long fallback) const { return has(key) ? integer(key) : fallback; }

  std::string text(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError("'" + name_ + "." + key + "' must be a string");
    return v.get<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    return has(key) ? text(key) : fallback;
  }

  // A number or an array of numbers.
  std::vector<double> numbers(const std::string& key) const {
    const json& v = raw(key);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array() || v.empty()) throw ConfigError("'" + name_ + "." + key + "' must be a number or a nonempty array");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError("'" + name_ + "." + key + "' must contain numbers only");
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const {
    return has(key) ? numbers(key) : fallback;
  }

  const std::string& name() const { return name_; }

 private:
  std::string name_;
  json node_;
};

// Complex scalar: a number, or [re, im].
cd complex_value(const json& v, const std::string& where) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  throw ConfigError("'" + where + "' entries must be numbers or [re, im] pairs");
}

std::vector<cd> complex_list(const json& v, const std::string& where) {
  if (v.is_number()) return {complex_value(v, where)};
  if (!v.is_array() || v.empty()) throw ConfigError("'" + where + "' must be a number or a nonempty array");
  // A bare pair of numbers is ambiguous; treat a two-number array as two real values.
  std::vector<cd> out;
  for (const auto& e : v) out.push_back(complex_value(e, where));
  return out;
}

// ---------------------------------------------------------------------------------------------
// Run context

struct Context {
  json config;
  std::string digest;
  fs::path base_dir;
  fs::path out_dir;
  std::string prefix;
  std::vector<std::string> written;

  std::string header_comment() const { return "# " + conic::version_line() + "\n# config fnv1a64 " + digest + "\n"; }

  fs::path path_for(const std::string& suffix, const std::string& ext) const {
    return out_dir / (prefix + suffix + ext);
  }

  std::ofstream open(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw ConfigError("cannot open output file '" + p.string() + "'");
    written.push_back(p.string());
    return out;
  }

  void write_csv(const std::string& suffix, const std::string& header, const std::vector<std::vector<std::string>>& rows) {
    auto out = open(path_for(suffix, ".csv"));
    out << header_comment() << header << '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
      out << '\n';
    }
  }

  void write_json(const std::string& suffix, json body) {
    body["version"] = conic::version_line();
    body["config_digest"] = digest;
    auto out = open(path_for(suffix, ".json"));
    out << body.dump(2) << '\n';
  }

  void write_text(const std::string& suffix, const std::string& body) {
    auto out = open(path_for(suffix, ".txt"));
    out << header_comment() << body;
  }
};

// ---------------------------------------------------------------------------------------------
// Geometry

struct Geometry {
  std::string kind;
  std::optional<conic::ConeGeometry> cone;
  std::vector<conic::SpectrumEntry> mock;  // kind == "mock"
};

Geometry load_geometry(const json& root, const fs::path& base) {
  Section g(root, "geometry", true);
  const std::string kind = g.text("kind");
  Geometry out;
  out.kind = kind;
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  auto check_n = [&](int n) {
    if (g.has("n") && g.integer("n") != n)
      throw ConfigError("geometry.n = " + std::to_string(g.integer("n")) + " does not match the cross-section (n = " +
                        std::to_string(n) + ")");
  };
  if (kind == "circle") {
    g.allow({"kind", "length", "cutoff", "modes", "n"});
    const double length = g.number("length");
    if (g.has("cutoff") && g.has("modes")) throw ConfigError("give geometry.cutoff or geometry.modes, not both");
    check_n(2);
    if (g.has("cutoff"))
      out.cone.emplace(2, conic::circle_spectrum(length, g.number("cutoff")), length);
    else
      out.cone = conic::ConeGeometry::over_circle(length, g.integer("modes", conic::ConeGeometry::kDefaultModes));
  } else if (kind == "sphere") {
    g.allow({"kind", "sphere_dim", "cutoff", "modes", "n"});
    const int d = static_cast<int>(g.integer("sphere_dim"));
    if (g.has("cutoff") && g.has("modes")) throw ConfigError("give geometry.cutoff or geometry.modes, not both");
    check_n(d + 1);
    if (g.has("cutoff")) {
      const double half = 0.5 * (d + 1);
      const double vol = 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
      out.cone.emplace(d + 1, conic::sphere_spectrum(d, g.number("cutoff")), vol);
    } else {
      out.cone = conic::ConeGeometry::over_sphere(d, g.integer("modes", conic::ConeGeometry::kDefaultModes));
    }
  } else if (kind == "file") {
    g.allow({"kind", "path", "n", "volume"});
    out.cone.emplace(static_cast<int>(g.integer("n")), conic::load_spectrum(resolve(g.text("path")).string()),
                     g.number("volume"));
  } else if (kind == "mock") {
    g.allow({"kind", "path"});
    out.mock = conic::load_spectrum(resolve(g.text("path")).string()).entries;
  } else {
    throw ConfigError("geometry.kind must be one of circle, sphere, file, mock (got '" + kind + "')");
  }
  return out;
}

const conic::ConeGeometry& require_cone(const Geometry& g, const std::string& what) {
  if (!g.cone) throw ConfigError(what + " needs a cone geometry (circle, sphere or file)");
  return *g.cone;
}

const conic::ConeGeometry& require_kernel(const Geometry& g, const std::string& what) {
  const auto& cone = require_cone(g, what);
  if (!cone.has_mode_kernel())
    throw ConfigError(what + " needs pointwise eigenspace kernels; use a circle or sphere cross-section");
  return cone;
}

// Section point at arc distance `angle` from a fixed base point, or an explicit coordinate array.
conic::SectionPoint section_point(const conic::ConeGeometry& cone, const json& v, const std::string& where) {
  const auto& spec = cone.spectrum();
  if (v.is_array()) {
    conic::SectionPoint p;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError("'" + where + "' must contain numbers");
      p.push_back(e.get<double>());
    }
    return p;
  }
  if (!v.is_number()) throw ConfigError("'" + where + "' must be a number or an array");
  const double a = v.get<double>();
  if (spec.source == conic::SpectrumSource::circle) return {a};
  conic::SectionPoint p(static_cast<std::size_t>(spec.sphere_dim + 1), 0.0);
  p[0] = std::cos(a);
  if (p.size() > 1) p[1] = std::sin(a);
  return p;
}

conic::SectionPoint point_at_distance(const conic::ConeGeometry& cone, double delta) {
  return section_point(cone, json(delta), "delta");
}

// ---------------------------------------------------------------------------------------------
// Numerics

const std::set<std::string> kNumericsKeys = {"max_modes",  "tail_tol",  "s_switch", "fit_s_max", "fit_points",
                                             "fit_residual_threshold",  "deltas",   "contour_phi",
                                             "contour_order", "seed",   "samples",  "tolerance"};

struct Numerics {
  conic::ModeSumConfig modes;
  conic::RenormConfig renorm;
  std::vector<double> deltas;
  double contour_phi = 0.75 * std::numbers::pi;
  int contour_order = 20;
  std::uint64_t seed = 20240611;
  int samples = 20;
  std::optional<double> tolerance;
};

Numerics load_numerics(const json& root) {
  Section s(root, "numerics", false);
  s.allow(kNumericsKeys);
  Numerics n;
  n.modes.max_modes = s.integer("max_modes", n.modes.max_modes);
  n.modes.tail_tol = s.number("tail_tol", n.modes.tail_tol);
  n.renorm.s_switch = s.number("s_switch", n.renorm.s_switch);
  n.renorm.fit_s_max = s.number("fit_s_max", n.renorm.fit_s_max);
  n.renorm.fit_points = static_cast<int>(s.integer("fit_points", n.renorm.fit_points));
  n.renorm.fit_residual_threshold = s.number("fit_residual_threshold", n.renorm.fit_residual_threshold);
  if (s.has("deltas")) n.deltas = s.numbers("deltas");
  n.contour_phi = s.number("contour_phi", n.contour_phi);
  n.contour_order = static_cast<int>(s.integer("contour_order", n.contour_order));
  if (s.has("seed")) {
    const long seed = s.integer("seed");
    if (seed < 0) throw ConfigError("numerics.seed must be nonnegative");
    n.seed = static_cast<std::uint64_t>(seed);
  }
  n.samples = static_cast<int>(s.integer("samples", n.samples));
  if (n.samples < 1) throw ConfigError("numerics.samples must be positive");
  if (s.has("tolerance")) n.tolerance = s.number("tolerance");
  if (!(n.renorm.s_switch > 0.0 && n.renorm.s_switch < n.renorm.fit_s_max))
    throw ConfigError("numerics.s_switch must lie in (0, fit_s_max)");
  return n;
}

// splitmix64; uniform doubles from the top 53 bits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  double uniform(double lo, double hi) {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    return lo + (hi - lo) * static_cast<double>(z >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

conic::Cutoff load_cutoff(const Section& task) {
  const std::string kind = task.text("cutoff", "sharp");
  if (kind == "sharp") return conic::Cutoff::sharp();
  if (kind == "smooth") return conic::Cutoff::smooth(task.number("cutoff_lo", 0.5), task.number("cutoff_hi", 2.0));
  throw ConfigError("task.cutoff must be 'sharp' or 'smooth'");
}

json expansion_json(const conic::DivergentExpansion& e, double t) {
  json j;
  j["t"] = t;
  j["n"] = e.n;
  j["divergent_coefficients"] = e.f;
  j["log_coefficient"] = e.f_log;
  j["finite_part"] = e.finite_part;
  j["residual"] = e.residual_norm;
  j["condition"] = e.condition;
  return j;
}

json phg_json(const conic::PhgExpansion& e) {
  json terms = json::array();
  for (const auto& t : e.terms) terms.push_back({{"exponent", t.z}, {"log_power", t.p}, {"coefficient", t.a}});
  json j;
  j["terms"] = terms;
  j["remainder_order"] = std::isfinite(e.remainder_order) ? json(e.remainder_order) : json("inf");
  return j;
}

// ---------------------------------------------------------------------------------------------
// Commands

int cmd_spectrum(Context& ctx, const Geometry& g, const Numerics&) {
  Section(ctx.config, "task", false).allow({});
  std::vector<std::vector<std::string>> rows;
  if (g.cone) {
    const auto& spec = g.cone->spectrum();
    const auto& roots = g.cone->roots();
    for (std::size_t j = 0; j < spec.size(); ++j)
      rows.push_back({num(spec[j].lambda), std::to_string(spec[j].multiplicity), num(roots[j].nu)});
    ctx.write_csv("", "lambda,multiplicity,nu", rows);
  } else {
    for (const auto& e : g.mock) rows.push_back({num(e.lambda), std::to_string(e.multiplicity)});
    ctx.write_csv("", "lambda,multiplicity", rows);
  }
  std::cout << "rows " << rows.size() << '\n';
  return kExitOk;
}

int cmd_heat(Context& ctx, const Geometry& g, const Numerics& nm) {
  Section task(ctx.config, "task", true);
  task.allow({"t", "r", "r2", "y", "y2", "grid", "method"});
  const auto& cone = require_cone(g, "heat");
  const std::string method = task.text("method", "modes");
  if (method != "modes" && method != "contour") throw ConfigError("task.method must be 'modes' or 'contour'");
  struct Row {
    double t, r, r2, delta;
  };
  std::vector<Row> rows;
  if (task.has("grid")) {
    for (const char* k : {"t", "r", "r2", "y", "y2"})
      if (task.has(k)) throw ConfigError(std::string("task.") + k + " conflicts with task.grid");
    Section grid(json{{"grid", task.raw("grid")}}, "grid", true);
    grid.allow({"t", "r", "r2", "delta"});
    for (double t : grid.numbers("t"))
      for (double r : grid.numbers("r"))
        for (double r2 : grid.numbers("r2"))
          for (double d : grid.numbers("delta")) rows.push_back({t, r, r2, d});
  } else {
    double delta = 0.0;
    if (task.has("y") || task.has("y2")) {
      if (!cone.has_mode_kernel()) throw ConfigError("file cross-sections support the diagonal only");
      delta = cone.section_distance(section_point(cone, task.has("y") ? task.raw("y") : json(0.0), "task.y"),
                                    section_point(cone, task.has("y2") ? task.raw("y2") : json(0.0), "task.y2"));
    }
    rows.push_back({task.number("t"), task.number("r"), task.number("r2", task.number("r")), delta});
  }
  std::vector<std::vector<std::string>> out(rows.size());
  std::string header;
  if (method == "modes") {
    header = "t,r,r2,delta,value,tail_estimate";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& w = rows[i];
      if (!cone.has_mode_kernel() && w.delta != 0.0) throw ConfigError("file cross-sections support delta = 0 only");
      const auto h = conic::heat_kernel_mode_sum(cone, w.t, w.r, w.r2, w.delta, nm.modes);
      out[i] = {num(w.t), num(w.r), num(w.r2), num(w.delta), num(h.value), num(h.tail_estimate)};
    }
  } else {
    require_kernel(g, "contour evaluation");
    header = "t,r,r2,delta,re,im";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& w = rows[i];
      auto spec = conic::contour_for_time(w.t, nm.contour_phi);
      spec.order = nm.contour_order;
      const auto h = conic::heat_from_resolvent_contour(cone, w.t, {w.r, point_at_distance(cone, 0.0)},
                                                        {w.r2, point_at_distance(cone, w.delta)}, spec, nm.modes);
      out[i] = {num(w.t), num(w.r), num(w.r2), num(w.delta), num(h.real()), num(h.imag())};
    }
  }
  ctx.write_csv("", header, out);
  if (out.size() == 1) std::cout << "value " << out[0][4] << '\n';
  std::cout << "rows " << out.size() << '\n';
  return kExitOk;
}

int cmd_resolvent(Context& ctx, const Geometry& g, const Numerics& nm) {
  Section task(ctx.config, "task", true);
  task.allow({"k", "r", "r2", "y", "y2", "grid"});
  const auto& cone = require_cone(g, "resolvent");
  struct Row {
    cd k;
    double r, r2, delta;
  };
  std::vector<Row> rows;
  if (task.has("grid")) {
    for (const char* k : {"k", "r", "r2", "y", "y2"})
      if (task.has(k)) throw ConfigError(std::string("task.") + k + " conflicts with task.grid");
    Section grid(json{{"grid", task.raw("grid")}}, "grid", true);
    grid.allow({"k", "r", "r2", "delta"});
    for (cd k : complex_list(grid.raw("k"), "task.grid.k"))
      for (double r : grid.numbers("r"))
        for (double r2 : grid.numbers("r2"))
          for (double d : grid.numbers("delta")) rows.push_back({k, r, r2, d});
  } else {
    double delta = 0.0;
    if (task.has("y") || task.has("y2")) {
      if (!cone.has_mode_kernel()) throw ConfigError("file cross-sections support the diagonal only");
      delta = cone.section_distance(section_point(cone, task.has("y") ? task.raw("y") : json(0.0), "task.y"),
                                    section_point(cone, task.has("y2") ? task.raw("y2") : json(0.0), "task.y2"));
    }
    rows.push_back({complex_value(task.raw("k"), "task.k"), task.number("r"), task.number("r2", task.number("r")), delta});
  }
  std::vector<std::vector<std::string>> out;
  for (const auto& w : rows) {
    if (!cone.has_mode_kernel() && w.delta != 0.0) throw ConfigError("file cross-sections support delta = 0 only");
    const auto v = conic::resolvent_mode_sum(cone, w.k, w.r, w.r2, w.delta, nm.modes);
    out.push_back({num(w.k.real()), num(w.k.imag()), num(w.r), num(w.r2), num(w.delta), num(v.value.real()),
                   num(v.value.imag()), num(v.tail_estimate)});
  }
  ctx.write_csv("", "k_re,k_im,r,r2,delta,re,im,tail_estimate", out);
  if (out.size() == 1) std::cout << "value " << out[0][5] << ' ' << out[0][6] << '\n';
  std::cout << "rows " << out.size() << '\n';
  return kExitOk;
}

// Finite parts over a t grid and the scaling certificate FP(t) = FP(1) - (a_n / 2) log t.
json t_certificate(const conic::TraceIntegrator& integ, const std::vector<double>& ts) {
  const int n = integ.dimension();
  const double an = integ.coefficients().a[n];
  const double fp1 = conic::renormalized_trace(integ, 1.0);
  double variation = 0.0, scaling = 0.0;
  json values = json::array();
  for (double t : ts) {
    const double fp = conic::renormalized_trace(integ, t);
    values.push_back({{"t", t}, {"finite_part", fp}});
    variation = std::max(variation, std::abs(fp - fp1));
    scaling = std::max(scaling, std::abs(fp - (fp1 - 0.5 * an * std::log(t))));
  }
  return {{"t_grid", ts},
          {"values", values},
          {"max_variation", variation},
          {"predicted_log_slope", -0.5 * an},
          {"max_scaling_defect", scaling}};
}

std::shared_ptr<const conic::TraceIntegrator> make_integrator(const conic::ConeGeometry& cone, const Numerics& nm) {
  return std::make_shared<const conic::TraceIntegrator>(conic::cone_trace_source(cone, nm.modes), nm.renorm);
}

int cmd_rtrace(Context& ctx, const Geometry& g, const Numerics& nm) {
  Section task(ctx.config, "task", false);
  task.allow({"t", "cutoff", "cutoff_lo", "cutoff_hi", "certificate_t"});
  const auto ts = task.numbers("t", {1.0});
  for (double t : ts)
    if (!(t > 0.0)) throw ConfigError("task.t entries must be positive");
  json report;
  if (!g.cone) {
    json vals = json::array();
    for (double t : ts) {
      double v = 0.0;
      for (const auto& e : g.mock) v += e.multiplicity * std::exp(-e.lambda * t);
      vals.push_back({{"t", t}, {"trace", v}});
      std::cout << "t " << num(t) << " trace " << num(v) << '\n';
    }
    report["traces"] = vals;
    ctx.write_json("_report", report);
    return kExitOk;
  }
  const auto chi = load_cutoff(task);
  const auto integ = make_integrator(*g.cone, nm);
  const int n = integ->dimension();
  json exps = json::array(), fps = json::array();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto sweep = conic::trace_sweep(*integ, ts[i], chi, nm.deltas);
    const auto e = conic::fit_divergent_expansion(sweep, n);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t j = 0; j < sweep.delta.size(); ++j) rows.push_back({num(sweep.delta[j]), num(sweep.values[j])});
    ctx.write_csv("_sweep_" + std::to_string(i), "delta,truncated_trace", rows);
    exps.push_back(expansion_json(e, ts[i]));
    fps.push_back({{"t", ts[i]}, {"finite_part", e.finite_part}});
    std::cout << "t " << num(ts[i]) << " finite_part " << num(e.finite_part) << '\n';
  }
  ctx.write_json("_expansion", {{"expansions", exps}});
  report["cutoff"] = chi.kind == conic::Cutoff::Kind::sharp ? "sharp" : "smooth";
  report["finite_parts"] = fps;
  report["heat_coefficients"] = integ->coefficients().a;
  report["certificate"] = t_certificate(*integ, task.numbers("certificate_t", {0.25, 0.5, 1.0, 2.0, 4.0}));
  ctx.write_json("_report", report);
  return kExitOk;
}

const std::set<std::string> kModelKeys = {"short_lo", "short_hi", "long_lo",       "long_hi",      "model_samples",
                                          "t_lo",     "t_hi",     "fit_tolerance", "taylor_order", "certificate_t"};

struct BuiltModel {
  conic::TraceModel model;
  std::shared_ptr<const conic::TraceIntegrator> integ;
};

BuiltModel build_model(Context& ctx, const Section& task, const Geometry& g, const Numerics& nm) {
  BuiltModel b;
  if (!g.cone) {
    b.model = conic::mock_spectrum_model(g.mock, static_cast<int>(task.integer("taylor_order", 12)),
                                         task.number("t_lo", 1e-2));
  } else {
    conic::ConeModelConfig mc;
    mc.short_lo = task.number("short_lo", mc.short_lo);
    mc.short_hi = task.number("short_hi", mc.short_hi);
    mc.long_lo = task.number("long_lo", mc.long_lo);
    mc.long_hi = task.number("long_hi", mc.long_hi);
    mc.samples = static_cast<int>(task.integer("model_samples", mc.samples));
    mc.t_lo = task.number("t_lo", mc.t_lo);
    mc.t_hi = task.number("t_hi", mc.t_hi);
    mc.fit_tolerance = task.number("fit_tolerance", mc.fit_tolerance);
    b.integ = make_integrator(*g.cone, nm);
    // Intermediate artifacts of the renormalization at t = 1.
    const auto sweep = conic::trace_sweep(*b.integ, 1.0, conic::Cutoff::sharp(), nm.deltas);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t j = 0; j < sweep.delta.size(); ++j) rows.push_back({num(sweep.delta[j]), num(sweep.values[j])});
    ctx.write_csv("_sweep", "delta,truncated_trace", rows);
    ctx.write_json("_expansion", expansion_json(conic::fit_divergent_expansion(sweep, b.integ->dimension()), 1.0));
    b.model = conic::build_trace_model_from_cone(b.integ, mc);
  }
  json m;
  m["short_expansion"] = phg_json(b.model.short_expansion());
  m["long_expansion"] = phg_json(b.model.long_expansion());
  m["window"] = {b.model.t_lo(), b.model.t_hi()};
  m["splice_gap_lo"] = b.model.splice_gap_lo();
  m["splice_gap_hi"] = b.model.splice_gap_hi();
  ctx.write_json("_model", m);
  return b;
}

json laurent_json(const conic::LaurentData& l) {
  return {{"residue", l.residue}, {"value", l.value}, {"derivative", l.derivative}};
}

json poles_json(const std::vector<conic::ZetaPole>& poles) {
  json p = json::array();
  for (const auto& q : poles) p.push_back({{"location", q.location}, {"order", q.order}, {"leading", q.leading}});
  return p;
}

int cmd_zeta(Context& ctx, const Geometry& g, const Numerics& nm) {
  Section task(ctx.config, "task", false);
  auto keys = kModelKeys;
  keys.insert({"s", "split"});
  task.allow(keys);
  const auto query = complex_list(task.has("s") ? task.raw("s") : json::array({-1.0, -0.3, 0.5, 1.0, 2.0}), "task.s");
  const double split = task.number("split", 1.0);
  if (split != 1.0 && split != 2.0) throw ConfigError("task.split must be 1 or 2");
  const auto b = build_model(ctx, task, g, nm);
  json report;
  report["poles"] = poles_json(conic::zeta_poles(b.model));
  json samples = json::array();
  std::vector<std::vector<std::string>> rows;
  bool failed = false;
  for (const cd& s : query) {
    try {
      const cd z = conic::renormalized_zeta(b.model, s, split);
      rows.push_back({num(s.real()), num(s.imag()), num(z.real()), num(z.imag())});
      samples.push_back({{"s", {s.real(), s.imag()}}, {"zeta", {z.real(), z.imag()}}});
      std::cout << "zeta(" << num(s.real()) << (s.imag() != 0.0 ? "+" + num(s.imag()) + "i" : "") << ") "
                << num(z.real()) << (z.imag() != 0.0 ? " " + num(z.imag()) + "i" : "") << '\n';
    } catch (const conic::PoleError& e) {
      failed = true;
      samples.push_back({{"s", {s.real(), s.imag()}}, {"error", e.what()}});
      std::cerr << "error: " << e.what() << '\n';
    }
  }
  try {
    report["laurent_at_0"] = laurent_json(conic::zeta_laurent_at_zero(b.model));
  } catch (const conic::PoleError& e) {
    report["laurent_at_0"] = {{"error", e.what()}, {"order", e.order()}};
  }
  report["samples"] = samples;
  report["split"] = split;
  ctx.write_csv("", "s_re,s_im,zeta_re,zeta_im", rows);
  ctx.write_json("_report", report);
  return failed ? kExitNumeric : kExitOk;
}

int cmd_det(Context& ctx, const Geometry& g, const Numerics& nm) {
  Section task(ctx.config, "task", false);
  auto keys = kModelKeys;
  keys.insert("residue_tol");
  task.allow(keys);
  const auto b = build_model(ctx, task, g, nm);
  const auto l = conic::zeta_laurent_at_zero(b.model);
  json report;
  report["laurent_at_0"] = laurent_json(l);
  report["poles"] = poles_json(conic::zeta_poles(b.model));
  if (b.integ)
    report["certificate"] = t_certificate(*b.integ, task.numbers("certificate_t", {0.25, 0.5, 1.0, 2.0, 4.0}));
  int code = kExitOk;
  try {
    const double ld = conic::log_renormalized_det(b.model, task.number("residue_tol", 1e-9));
    report["log_det"] = ld;
    report["det"] = std::exp(ld);
    std::cout << "log_det " << num(ld) << "\ndet " << num(std::exp(ld)) << '\n';
  } catch (const conic::UndefinedDeterminant& e) {
    report["log_det"] = nullptr;
    report["error"] = e.what();
    std::cerr << "error: " << e.what() << " (residue " << num(l.residue) << ")\n";
    code = kExitNumeric;
  }
  ctx.write_json("_report", report);
  return code;
}

// ---------------------------------------------------------------------------------------------
// verify

struct Check {
  std::string name, expected, actual;
  bool pass = false;
};

int finish_verify(Context& ctx, const std::string& suite, const std::vector<Check>& checks) {
  std::ostringstream text;
  bool all = !checks.empty();
  for (const auto& c : checks) {
    text << (c.pass ? "PASS" : "FAIL") << "  " << c.name << "  expected " << c.expected << "  actual " << c.actual
         << '\n';
    all = all && c.pass;
  }
  text << (all ? "suite " + suite + " passed\n" : "suite " + suite + " FAILED\n");
  std::cout << text.str();
  ctx.write_text("_" + suite, text.str());
  json j;
  j["suite"] = suite;
  j["passed"] = all;
  json arr = json::array();
  for (const auto& c : checks)
    arr.push_back({{"check", c.name}, {"expected", c.expected}, {"actual", c.actual}, {"pass", c.pass}});
  j["checks"] = arr;
  ctx.write_json("_" + suite, j);
  return all ? kExitOk : kExitNumeric;
}

std::string order_text(const std::optional<conic::IndexPair>& o) {
  if (!o) return "inf";
  std::ostringstream s;
  s << o->z;
  if (o->p > 0) s << (o->p == 1 ? " log" : " log^" + std::to_string(o->p));
  return s.str();
}

std::vector<Check> verify_index(int n) {
  using conic::Face;
  std::vector<Check> checks;
  const auto res = n == 2 ? conic::low_energy_resolvent_family_2d() : conic::low_energy_resolvent_family(n);
  const auto heat = conic::heat_family_from_resolvent(res, n, true);
  auto expect = [&](const std::string& label, const conic::IndexFamily& fam, Face f,
                    std::optional<conic::IndexPair> want) {
    const auto got = fam[f].leading();
    const bool ok = want.has_value() == got.has_value() &&
                    (!want || (std::abs(want->z - got->z) < 1e-12 && (label == "heat" || want->p == got->p)));
    checks.push_back({label + " " + conic::face_name(f), order_text(want), order_text(got), ok});
  };
  const double nn = n;
  const std::map<Face, std::optional<conic::IndexPair>> res_want = {
      {Face::sc, conic::IndexPair{0, 0}},
      {Face::bf0, conic::IndexPair{n == 2 ? 0.0 : nn - 2, 0}},
      {Face::rb0, conic::IndexPair{n == 2 ? 0.0 : nn - 2, 0}},
      {Face::lb0, conic::IndexPair{n == 2 ? 0.0 : nn - 2, 0}},
      {Face::zf, conic::IndexPair{0, n == 2 ? 1 : 0}},
      {Face::lb, std::nullopt},
      {Face::rb, std::nullopt},
      {Face::bf, std::nullopt}};
  for (const auto& [f, w] : res_want) expect("resolvent", res, f, w);
  const std::map<Face, std::optional<conic::IndexPair>> heat_want = {
      {Face::sc, conic::IndexPair{0, 0}},  {Face::bf0, conic::IndexPair{nn, 0}}, {Face::rb0, conic::IndexPair{nn, 0}},
      {Face::lb0, conic::IndexPair{nn, 0}}, {Face::zf, conic::IndexPair{nn, 0}},  {Face::lb, std::nullopt},
      {Face::rb, std::nullopt},            {Face::bf, std::nullopt}};
  for (const auto& [f, w] : heat_want) expect("heat", heat, f, w);
  return checks;
}

int cmd_verify(Context& ctx, const Geometry& g, const Numerics& nm, std::string suite) {
  Section task(ctx.config, "task", false);
  task.allow({"suite", "n", "t", "cutoff_lo", "cutoff_hi", "kappas", "sigmas"});
  if (suite.empty()) suite = task.text("suite", "");
  static const std::set<std::string> suites = {"orders", "contour", "cutoffs", "bound", "matching", "index"};
  if (!suites.count(suite))
    throw ConfigError("verify needs --suite (or task.suite) in {orders, contour, cutoffs, bound, matching, index}");
  std::vector<Check> checks;

  if (suite == "index") {
    int n = 0;
    if (task.has("n"))
      n = static_cast<int>(task.integer("n"));
    else
      n = require_cone(g, "index suite").dimension();
    if (n < 2) throw ConfigError("task.n must be at least 2");
    checks = verify_index(n);
  } else if (suite == "orders") {
    const auto& cone = require_kernel(g, "orders suite");
    conic::HeatPathConfig hp;
    hp.modes = nm.modes;
    const double tol = nm.tolerance.value_or(0.05);
    for (auto regime : {conic::HeatRegime::zf, conic::HeatRegime::lb0, conic::HeatRegime::bf0,
                        conic::HeatRegime::short_time_diag}) {
      const auto c = conic::verify_heat_orders(cone, regime, hp);
      const auto judged = conic::judge_order(c.regime, c.expected, c.fit, tol);
      checks.push_back({"heat " + judged.regime, num(judged.expected), num(judged.fit.exponent) + " (" + judged.status + ")",
                        judged.pass});
    }
    if (cone.dimension() == 2 || cone.dimension() == 3) {
      conic::ResolventPathConfig rp;
      rp.modes = nm.modes;
      const auto r = conic::verify_resolvent_orders(cone, rp);
      checks.push_back({"resolvent log k coefficient", num(r.expected_log_coefficient), num(r.log_coefficient),
                        std::abs(r.log_coefficient - r.expected_log_coefficient) < rp.tolerance});
      checks.push_back({"resolvent finite limit drift", "< 1e-4", num(r.finite_part_drift),
                        r.finite_part_drift < rp.tolerance * std::max(1.0, std::abs(r.finite_part))});
    }
  } else if (suite == "contour") {
    const auto& cone = require_kernel(g, "contour suite");
    const double tol = nm.tolerance.value_or(1e-6);
    Rng rng(nm.seed);
    double worst = 0.0, worst_im = 0.0;
    for (int i = 0; i < nm.samples; ++i) {
      const double t = rng.uniform(0.5, 2.0);
      const double r = rng.uniform(0.5, 1.5);
      const double r2 = r * rng.uniform(0.3, 0.7);
      const double delta = rng.uniform(0.0, cone.section_diameter());
      auto spec = conic::contour_for_time(t, nm.contour_phi);
      spec.order = nm.contour_order;
      const conic::ConePoint p{r, point_at_distance(cone, 0.0)}, p2{r2, point_at_distance(cone, delta)};
      const cd hc = conic::heat_from_resolvent_contour(cone, t, p, p2, spec, nm.modes);
      const double hm = conic::heat_kernel_cone(cone, t, p, p2, nm.modes);
      worst = std::max(worst, std::abs(hc.real() - hm) / std::max(std::abs(hm), 1e-300));
      worst_im = std::max(worst_im, std::abs(hc.imag()));
    }
    checks.push_back({"max relative |contour - mode sum|", "< " + brief(tol), num(worst), worst < tol});
    checks.push_back({"max |imaginary part|", "< 1e-09", num(worst_im), worst_im < 1e-9});
  } else if (suite == "cutoffs") {
    const auto& cone = require_cone(g, "cutoffs suite");
    const double tol = nm.tolerance.value_or(1e-6);
    const auto integ = make_integrator(cone, nm);
    const auto smooth = conic::Cutoff::smooth(task.number("cutoff_lo", 0.5), task.number("cutoff_hi", 2.0));
    for (double t : task.numbers("t", {1.0})) {
      const auto c = conic::compare_cutoffs(*integ, t, smooth);
      const std::string at = " at t=" + num(t);
      checks.push_back({"divergent coefficients f_k(smooth) = l_k f_k(sharp)" + at, "< " + brief(tol),
                        num(c.coefficient_deviation), c.coefficient_deviation < tol});
      checks.push_back({"log coefficient unchanged" + at, "< " + brief(tol), num(c.log_deviation), c.log_deviation < tol});
      checks.push_back({"finite part shift = -l_log f_log" + at, num(c.predicted_shift), num(c.finite_part_shift),
                        c.shift_deviation < tol});
    }
  } else if (suite == "bound") {
    const auto& cone = require_kernel(g, "bound suite");
    Rng rng(nm.seed);
    std::vector<conic::HeatSample> samples;
    for (int i = 0; i < nm.samples; ++i) {
      const double t = std::exp(rng.uniform(std::log(0.05), std::log(20.0)));
      const double r = std::exp(rng.uniform(std::log(0.1), std::log(5.0)));
      const double r2 = std::exp(rng.uniform(std::log(0.1), std::log(5.0)));
      const double delta = rng.uniform(0.0, cone.section_diameter());
      samples.push_back({t, {r, point_at_distance(cone, 0.0)}, {r2, point_at_distance(cone, delta)}});
    }
    const auto fit = conic::gaussian_bound_fit(cone, samples, {4.0, 4.5, 5.0, 6.0, 8.0, 12.0, 16.0}, 1e6, nm.modes);
    checks.push_back({"finite (C1, C2) found", "certified", fit.certified ? "C1=" + num(fit.c1) + " C2=" + num(fit.c2)
                                                                           : "none",
                      fit.certified});
    checks.push_back({"violations", "0", std::to_string(fit.violations.size()), fit.violations.empty()});
  } else if (suite == "matching") {
    const auto& cone = require_kernel(g, "matching suite");
    if (cone.dimension() != 2) throw ConfigError("matching suite needs a two-dimensional cone");
    const double tol = nm.tolerance.value_or(1e-4);
    const auto rep = conic::verify_bf0_zf_matching(cone, task.numbers("kappas", {1e-2, 1e-3, 1e-4, 1e-5}),
                                                   task.numbers("sigmas", {0.25, 0.5, 2.0, 4.0}), 0.0, nm.modes);
    checks.push_back({"corner model vs zero-frequency prediction", "< " + brief(tol), num(rep.max_deviation),
                      rep.max_deviation < tol});
    checks.push_back({"log kappa coefficient", num(-1.0 / cone.volume()), num(rep.log_coefficient),
                      std::abs(rep.log_coefficient + 1.0 / cone.volume()) < tol});
  }
  return finish_verify(ctx, suite, checks);
}

// ---------------------------------------------------------------------------------------------
// Entry

void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &cfg;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("--set has an empty key in '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key)) (*node)[key] = json::object();
    node = &(*node)[key];
    if (!node->is_object()) throw ConfigError("--set path '" + path + "' crosses a non-object value");
    start = dot + 1;
  }
}

int run(const std::string& command, const std::string& config_path, const std::vector<std::string>& sets,
        const std::string& out_dir_flag, const std::string& suite) {
  Context ctx;
  {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config file '" + config_path + "'");
    try {
      ctx.config = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
  }
  if (!ctx.config.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& s : sets) apply_override(ctx.config, s);
  if (!suite.empty()) ctx.config["task"]["suite"] = suite;
  for (const auto& [k, v] : ctx.config.items())
    if (k != "geometry" && k != "numerics" && k != "task" && k != "output")
      throw ConfigError("unknown top-level section '" + k + "'");

  ctx.digest = hex64(fnv1a64(ctx.config.dump()));
  ctx.base_dir = fs::absolute(config_path).parent_path();
  Section output(ctx.config, "output", false);
  output.allow({"dir", "prefix"});
  fs::path dir = out_dir_flag.empty() ? fs::path(output.text("dir", ".")) : fs::path(out_dir_flag);
  if (dir.is_relative() && out_dir_flag.empty()) dir = ctx.base_dir / dir;
  ctx.out_dir = dir;
  ctx.prefix = output.text("prefix", command == "verify" ? "verify" : command);

  // Schema checks before any computation.
  const Geometry geom = load_geometry(ctx.config, ctx.base_dir);
  const Numerics nm = load_numerics(ctx.config);
  std::error_code ec;
  fs::create_directories(ctx.out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + ctx.out_dir.string() + "'");

  std::cout << conic::version_line() << "\nconfig fnv1a64 " << ctx.digest << '\n';
  int code = kExitOk;
  if (command == "spectrum") code = cmd_spectrum(ctx, geom, nm);
  else if (command == "heat") code = cmd_heat(ctx, geom, nm);
  else if (command == "resolvent") code = cmd_resolvent(ctx, geom, nm);
  else if (command == "rtrace") code = cmd_rtrace(ctx, geom, nm);
  else if (command == "zeta") code = cmd_zeta(ctx, geom, nm);
  else if (command == "det") code = cmd_det(ctx, geom, nm);
  else if (command == "verify") code = cmd_verify(ctx, geom, nm, suite);
  for (const auto& w : ctx.written) std::cout << "wrote " << w << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heat kernels, renormalized traces, zeta functions and determinants on exact cones"};
  app.set_version_flag("--version", conic::version_line());
  app.require_subcommand(1);
  std::string config_path, out_dir, suite;
  std::vector<std::string> sets;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"spectrum", "cross-section spectrum with indicial roots"},
      {"heat", "heat kernel at a point or on a grid"},
      {"resolvent", "resolvent kernel at a point or on a grid"},
      {"rtrace", "renormalized heat trace with sweep and expansion artifacts"},
      {"zeta", "renormalized zeta function"},
      {"det", "renormalized determinant"},
      {"verify", "verification suites"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("config", config_path, "JSON config file")->required();
    sub->add_option("--set", sets, "override a config entry: section.key=value (JSON value)");
    sub->add_option("--out-dir", out_dir, "output directory (overrides output.dir)");
    if (name == "verify")
      sub->add_option("--suite", suite, "orders, contour, cutoffs, bound, matching or index");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  std::string command;
  for (const auto* sub : app.get_subcommands()) command = sub->get_name();
  try {
    return run(command, config_path, sets, out_dir, suite);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const conic::ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const conic::InvalidGeometry& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const conic::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const conic::Error& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  }
}
