#pragma once

// Cross-section spectra, indicial roots and the exact-cone geometry built on them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "conic/errors.hpp"
#include "conic/special_functions.hpp"

namespace conic {

enum class SpectrumSource { circle, sphere, file };

struct SpectrumEntry {
  double lambda = 0.0;
  int multiplicity = 1;
  bool operator==(const SpectrumEntry&) const = default;
};

/// Truncated spectrum of the cross-section Laplacian: every eigenvalue <= cutoff is listed.
struct Spectrum {
  std::vector<SpectrumEntry> entries;
  SpectrumSource source = SpectrumSource::file;
  double circle_length = 0.0;
  int sphere_dim = 0;
  std::string path;
  double cutoff = 0.0;

  std::size_t size() const { return entries.size(); }
  const SpectrumEntry& operator[](std::size_t j) const { return entries[j]; }

  /// Number of eigenvalues counted with multiplicity.
  long long total_multiplicity() const {
    long long c = 0;
    for (const auto& e : entries) c += e.multiplicity;
    return c;
  }
};

inline void validate_spectrum(const Spectrum& s) {
  for (std::size_t j = 0; j < s.entries.size(); ++j) {
    if (!(s.entries[j].lambda >= 0.0) || !std::isfinite(s.entries[j].lambda))
      throw InvalidGeometry("spectrum entry " + std::to_string(j) + " has a negative or non-finite eigenvalue");
    if (s.entries[j].multiplicity < 1)
      throw InvalidGeometry("spectrum entry " + std::to_string(j) + " has multiplicity < 1");
    if (j > 0 && !(s.entries[j].lambda > s.entries[j - 1].lambda))
      throw InvalidGeometry("spectrum eigenvalues must be strictly increasing");
  }
}

/// Circle of length L: lambda_j = (2 pi j / L)^2, multiplicity 2 for j >= 1.
inline Spectrum circle_spectrum(double length, double cutoff) {
  if (!(length > 0.0) || !std::isfinite(length)) throw InvalidGeometry("circle length must be positive");
  if (!(cutoff >= 0.0)) throw InvalidArgument("spectral cutoff must be nonnegative");
  Spectrum s;
  s.source = SpectrumSource::circle;
  s.circle_length = length;
  s.cutoff = cutoff;
  for (long j = 0;; ++j) {
    const double freq = 2.0 * std::numbers::pi * static_cast<double>(j) / length;
    const double lambda = freq * freq;
    if (lambda > cutoff) break;
    s.entries.push_back({lambda, j == 0 ? 1 : 2});
  }
  return s;
}

/// Dimension of the degree-k spherical harmonics on S^d.
inline long long sphere_multiplicity(int d, long long k) {
  auto binom = [](long long top, long long bottom) -> long long {
    if (bottom < 0 || top < bottom) return 0;
    long double r = 1.0L;
    for (long long i = 1; i <= bottom; ++i) r = r * static_cast<long double>(top - bottom + i) / i;
    return static_cast<long long>(std::llround(r));
  };
  return binom(k + d, d) - binom(k + d - 2, d);
}

/// Round sphere S^d: lambda_k = k(k + d - 1).
inline Spectrum sphere_spectrum(int d, double cutoff) {
  if (d < 1) throw InvalidGeometry("sphere dimension must be at least 1");
  if (!(cutoff >= 0.0)) throw InvalidArgument("spectral cutoff must be nonnegative");
  Spectrum s;
  s.source = SpectrumSource::sphere;
  s.sphere_dim = d;
  s.cutoff = cutoff;
  for (long long k = 0;; ++k) {
    const double lambda = static_cast<double>(k) * static_cast<double>(k + d - 1);
    if (lambda > cutoff) break;
    const long long m = sphere_multiplicity(d, k);
    if (m > std::numeric_limits<int>::max()) throw OverflowError("sphere multiplicity exceeds int range");
    s.entries.push_back({lambda, static_cast<int>(m)});
  }
  return s;
}

/// Reads "lambda multiplicity" pairs, one per line, '#' starting a comment.
/// Repeated eigenvalues are merged only when their text matches exactly.
inline Spectrum parse_spectrum(std::istream& in, const std::string& origin = "") {
  Spectrum s;
  s.source = SpectrumSource::file;
  s.path = origin;
  std::string line;
  std::string last_text;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string lam_text, mult_text, extra;
    if (!(fields >> lam_text)) continue;
    if (!(fields >> mult_text) || (fields >> extra)) throw ParseError("expected 'eigenvalue multiplicity'", lineno);
    double lambda = 0.0;
    long long mult = 0;
    try {
      std::size_t used = 0;
      lambda = std::stod(lam_text, &used);
      if (used != lam_text.size()) throw std::invalid_argument(lam_text);
      used = 0;
      mult = std::stoll(mult_text, &used);
      if (used != mult_text.size()) throw std::invalid_argument(mult_text);
    } catch (const std::logic_error&) {
      throw ParseError("malformed number", lineno);
    }
    if (!std::isfinite(lambda) || lambda < 0.0) throw ParseError("eigenvalue must be finite and nonnegative", lineno);
    if (mult <= 0) throw ParseError("multiplicity must be a positive integer", lineno);
    if (mult > std::numeric_limits<int>::max()) throw ParseError("multiplicity too large", lineno);
    if (!s.entries.empty()) {
      if (lam_text == last_text) {
        s.entries.back().multiplicity += static_cast<int>(mult);
        continue;
      }
      if (!(lambda > s.entries.back().lambda)) throw ParseError("eigenvalues must be strictly increasing", lineno);
    }
    s.entries.push_back({lambda, static_cast<int>(mult)});
    last_text = lam_text;
  }
  if (s.entries.empty()) throw ParseError("empty spectrum", 0);
  s.cutoff = s.entries.back().lambda;
  return s;
}

inline Spectrum load_spectrum(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open spectrum file '" + path + "'", 0);
  return parse_spectrum(in, path);
}

struct IndicialRoot {
  double nu = 0.0;
  int multiplicity = 1;
};

/// nu_j = sqrt((n/2 - 1)^2 + lambda_j).
inline double indicial_root(int n, double lambda) {
  const double shift = 0.5 * n - 1.0;
  return std::sqrt(shift * shift + lambda);
}

/// A point of the cross-section: the arc coordinate for a circle, a vector in R^{d+1} for S^d.
using SectionPoint = std::vector<double>;

/// Exact cone dr^2 + r^2 h over a cross-section with a (truncated) known spectrum.
///
/// Built-in cross-sections (circle, sphere) carry closed-form eigenspace kernels, so
/// pointwise kernels in y are available. File spectra only support quantities that
/// depend on multiplicities alone.
class ConeGeometry {
 public:
  /// Default number of modes generated for built-in cross-sections.
  static constexpr long kDefaultModes = 2000;

  ConeGeometry(int n, Spectrum spectrum, double volume) : n_(n), spectrum_(std::move(spectrum)), volume_(volume) {
    if (n_ < 2) throw InvalidGeometry("cone dimension must be at least 2");
    if (!(volume_ > 0.0) || !std::isfinite(volume_)) throw InvalidGeometry("cross-section volume must be positive");
    if (spectrum_.entries.empty()) throw InvalidGeometry("cone needs a nonempty spectrum");
    validate_spectrum(spectrum_);
    if (spectrum_.source == SpectrumSource::circle && n_ != 2)
      throw InvalidGeometry("a cone over a circle has dimension 2");
    if (spectrum_.source == SpectrumSource::sphere && n_ != spectrum_.sphere_dim + 1)
      throw InvalidGeometry("a cone over S^d has dimension d + 1");
    if (spectrum_.source != SpectrumSource::file &&
        (spectrum_.entries.front().lambda != 0.0 || spectrum_.entries.front().multiplicity != 1))
      throw InvalidGeometry("connected cross-section must start with the constant mode (0, 1)");
    roots_.reserve(spectrum_.size());
    for (const auto& e : spectrum_.entries) roots_.push_back({indicial_root(n_, e.lambda), e.multiplicity});
  }

  static ConeGeometry over_circle(double length, long modes = kDefaultModes) {
    const double top = 2.0 * std::numbers::pi * static_cast<double>(modes) / length;
    return ConeGeometry(2, circle_spectrum(length, top * top * (1.0 + 1e-12)), length);
  }

  static ConeGeometry over_sphere(int d, long modes = kDefaultModes) {
    const double k = static_cast<double>(modes);
    auto s = sphere_spectrum(d, k * (k + d - 1.0) * (1.0 + 1e-12));
    const double half = 0.5 * (d + 1);
    const double vol = 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
    return ConeGeometry(d + 1, std::move(s), vol);
  }

  int dimension() const { return n_; }
  const Spectrum& spectrum() const { return spectrum_; }
  double volume() const { return volume_; }
  const std::vector<IndicialRoot>& roots() const { return roots_; }
  std::size_t mode_count() const { return roots_.size(); }
  bool has_mode_kernel() const { return spectrum_.source != SpectrumSource::file; }

  /// Geodesic distance on the cross-section.
  double section_distance(const SectionPoint& y, const SectionPoint& y2) const {
    require_kernel();
    if (spectrum_.source == SpectrumSource::circle) {
      if (y.size() != 1 || y2.size() != 1) throw InvalidArgument("circle points have one coordinate");
      const double len = spectrum_.circle_length;
      double gap = std::fmod(std::abs(y[0] - y2[0]), len);
      return std::min(gap, len - gap);
    }
    const std::size_t dim = static_cast<std::size_t>(spectrum_.sphere_dim) + 1;
    if (y.size() != dim || y2.size() != dim)
      throw InvalidArgument("sphere points need " + std::to_string(dim) + " coordinates");
    double dot = 0.0, a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      dot += y[i] * y2[i];
      a += y[i] * y[i];
      b += y2[i] * y2[i];
    }
    if (a == 0.0 || b == 0.0) throw InvalidArgument("sphere point must be nonzero");
    return std::acos(std::clamp(dot / std::sqrt(a * b), -1.0, 1.0));
  }

  /// Largest possible cross-section distance.
  double section_diameter() const {
    require_kernel();
    return spectrum_.source == SpectrumSource::circle ? 0.5 * spectrum_.circle_length : std::numbers::pi;
  }

  /// Eigenspace kernels Pi_j evaluated at cross-section distance `delta`, for j < count.
  void mode_kernels(double delta, std::size_t count, std::vector<double>& out) const {
    require_kernel();
    count = std::min(count, roots_.size());
    out.resize(count);
    if (count == 0) return;
    if (spectrum_.source == SpectrumSource::circle) {
      const double len = spectrum_.circle_length;
      const double w = 2.0 * std::numbers::pi * delta / len;
      out[0] = 1.0 / len;
      // cos(j w) by the Chebyshev recurrence, resynchronised periodically.
      double c_prev = 1.0, c = std::cos(w);
      const double two_c = 2.0 * c;
      for (std::size_t j = 1; j < count; ++j) {
        if (j % 64 == 0) {
          c = std::cos(static_cast<double>(j) * w);
          c_prev = std::cos(static_cast<double>(j - 1) * w);
        }
        out[j] = 2.0 / len * c;
        const double next = two_c * c - c_prev;
        c_prev = c;
        c = next;
      }
      return;
    }
    const int d = spectrum_.sphere_dim;
    const double x = std::cos(delta);
    if (d == 1) {
      for (std::size_t k = 0; k < count; ++k)
        out[k] = spectrum_.entries[k].multiplicity / volume_ * std::cos(static_cast<double>(k) * delta);
      return;
    }
    // Normalised Gegenbauer C_k^alpha(x) / C_k^alpha(1).
    const double alpha = 0.5 * (d - 1);
    double g_prev = 1.0, g = x;
    for (std::size_t k = 0; k < count; ++k) {
      double ratio;
      if (k == 0) {
        ratio = 1.0;
      } else if (k == 1) {
        ratio = x;
      } else {
        const double kk = static_cast<double>(k);
        const double next = ((2.0 * kk + 2.0 * alpha - 2.0) * x * g - (kk - 1.0) * g_prev) / (kk + 2.0 * alpha - 1.0);
        g_prev = g;
        g = next;
        ratio = g;
      }
      out[k] = spectrum_.entries[k].multiplicity / volume_ * ratio;
    }
  }

  double mode_kernel(std::size_t j, const SectionPoint& y, const SectionPoint& y2) const {
    if (j >= roots_.size()) throw InvalidArgument("mode index beyond the truncated spectrum");
    std::vector<double> ks;
    mode_kernels(section_distance(y, y2), j + 1, ks);
    return ks[j];
  }

  /// Cone distance between (r, y) and (r2, y2) whose cross-section distance is delta.
  static double cone_distance(double r, double r2, double delta) {
    if (delta >= std::numbers::pi) return r + r2;
    const double diff = r - r2;
    return std::sqrt(diff * diff + 2.0 * r * r2 * (1.0 - std::cos(delta)));
  }

 private:
  void require_kernel() const {
    if (!has_mode_kernel())
      throw InvalidGeometry("pointwise kernels need a built-in cross-section (circle or sphere)");
  }

  int n_;
  Spectrum spectrum_;
  double volume_;
  std::vector<IndicialRoot> roots_;
};

inline std::vector<IndicialRoot> indicial_roots(const ConeGeometry& cone) { return cone.roots(); }

}  // namespace conic
