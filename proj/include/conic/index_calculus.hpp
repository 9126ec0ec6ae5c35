#pragma once

// Index sets on the boundary faces of the low-energy and long-time double spaces.
//
// An index set is stored as an antichain of generators (z, p). Membership follows the closure
// rules (z, p) => (z + 1, p) and (z, p) => (z, q) for q <= p, and is only meaningful below the
// truncation order. The empty set stands for decay to infinite order.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "conic/errors.hpp"

namespace conic {

struct IndexPair {
  double z = 0.0;
  int p = 0;
  friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

inline constexpr double kDefaultTruncation = 32.0;

namespace detail {

inline bool integer_offset(double d) { return d > -1e-9 && std::abs(d - std::round(d)) < 1e-9; }

}  // namespace detail

class IndexSet {
 public:
  IndexSet() = default;
  explicit IndexSet(std::vector<IndexPair> generators, double truncation = kDefaultTruncation)
      : gens_(std::move(generators)), truncation_(truncation) {
    for (const auto& g : gens_)
      if (g.p < 0 || !std::isfinite(g.z)) throw InvalidArgument("index set generators need finite z and p >= 0");
    normalize();
  }

  static IndexSet empty(double truncation = kDefaultTruncation) { return IndexSet({}, truncation); }

  bool is_empty() const { return gens_.empty(); }
  const std::vector<IndexPair>& generators() const { return gens_; }
  double truncation() const { return truncation_; }

  /// (z, p) is a member when some generator reaches it by the closure rules.
  bool contains(IndexPair e) const {
    if (e.z >= truncation_) throw InvalidArgument("membership is undecidable at or above the truncation order");
    for (const auto& g : gens_)
      if (detail::integer_offset(e.z - g.z) && e.p <= g.p) return true;
    return false;
  }

  /// Largest log power present at order z, or nullopt when z is not an order of the set.
  std::optional<int> max_log_at(double z) const {
    std::optional<int> best;
    for (const auto& g : gens_)
      if (detail::integer_offset(z - g.z)) best = std::max(best.value_or(0), g.p);
    return best;
  }

  /// Minimum order; among generators of that order, the largest log power.
  std::optional<IndexPair> leading() const {
    if (gens_.empty()) return std::nullopt;
    IndexPair best = gens_.front();
    for (const auto& g : gens_)
      if (g.z < best.z - 1e-12 || (std::abs(g.z - best.z) <= 1e-12 && g.p > best.p)) best = g;
    return best;
  }

  /// Membership equality below the common truncation order.
  friend bool operator==(const IndexSet& a, const IndexSet& b) {
    return a.gens_.size() == b.gens_.size() &&
           std::equal(a.gens_.begin(), a.gens_.end(), b.gens_.begin(), [](const IndexPair& x, const IndexPair& y) {
             return std::abs(x.z - y.z) < 1e-9 && x.p == y.p;
           });
  }

  std::string str() const {
    if (gens_.empty()) return "{}";
    std::ostringstream out;
    out << '{';
    for (std::size_t i = 0; i < gens_.size(); ++i) out << (i ? ", " : "") << '(' << gens_[i].z << ',' << gens_[i].p << ')';
    out << '}';
    return out.str();
  }

 private:
  // Drops generators at or above the truncation and those dominated by another generator,
  // then sorts. Dominated means reachable from another generator by the closure rules.
  void normalize() {
    std::vector<IndexPair> kept;
    for (std::size_t i = 0; i < gens_.size(); ++i) {
      const auto& g = gens_[i];
      if (g.z >= truncation_) continue;
      bool dominated = false;
      for (std::size_t j = 0; j < gens_.size() && !dominated; ++j) {
        if (i == j) continue;
        const auto& h = gens_[j];
        if (!detail::integer_offset(g.z - h.z) || g.p > h.p) continue;
        // Identical generators: keep the first copy only.
        const bool same = std::abs(g.z - h.z) < 1e-9 && g.p == h.p;
        dominated = !same || j < i;
      }
      if (!dominated) kept.push_back(g);
    }
    std::sort(kept.begin(), kept.end(),
              [](const IndexPair& a, const IndexPair& b) { return a.z != b.z ? a.z < b.z : a.p < b.p; });
    gens_ = std::move(kept);
  }

  std::vector<IndexPair> gens_;
  double truncation_ = kDefaultTruncation;
};

/// Every (z, p) becomes (z + c, p).
inline IndexSet shift(const IndexSet& e, double c) {
  std::vector<IndexPair> g;
  for (const auto& x : e.generators()) g.push_back({x.z + c, x.p});
  return IndexSet(std::move(g), e.truncation() + c);
}

/// Plain union.
inline IndexSet set_union(const IndexSet& e, const IndexSet& f) {
  auto g = e.generators();
  g.insert(g.end(), f.generators().begin(), f.generators().end());
  return IndexSet(std::move(g), std::min(e.truncation(), f.truncation()));
}

/// Sum {(a + b, p + q)}; empty if either factor is empty.
inline IndexSet set_sum(const IndexSet& e, const IndexSet& f) {
  const double tr = std::min(e.truncation(), f.truncation());
  if (e.is_empty() || f.is_empty()) return IndexSet::empty(tr);
  std::vector<IndexPair> g;
  for (const auto& a : e.generators())
    for (const auto& b : f.generators()) g.push_back({a.z + b.z, a.p + b.p});
  return IndexSet(std::move(g), tr);
}

/// E ∪ F together with (z, p + q + 1) wherever (z, p) ∈ E and (z, q) ∈ F. Coincidences are
/// found on the closures: two generators whose orders differ by an integer meet at the larger
/// order and at every integer step above it.
inline IndexSet extended_union(const IndexSet& e, const IndexSet& f) {
  auto g = e.generators();
  g.insert(g.end(), f.generators().begin(), f.generators().end());
  for (const auto& a : e.generators())
    for (const auto& b : f.generators())
      if (std::abs(a.z - b.z - std::round(a.z - b.z)) < 1e-9) g.push_back({std::max(a.z, b.z), a.p + b.p + 1});
  return IndexSet(std::move(g), std::min(e.truncation(), f.truncation()));
}

enum class Face { zf, bf0, lb0, rb0, sc, lb, rb, bf };

inline constexpr std::array<Face, 8> kAllFaces = {Face::zf, Face::bf0, Face::lb0, Face::rb0,
                                                  Face::sc, Face::lb,  Face::rb,  Face::bf};

inline const char* face_name(Face f) {
  switch (f) {
    case Face::zf: return "zf";
    case Face::bf0: return "bf0";
    case Face::lb0: return "lb0";
    case Face::rb0: return "rb0";
    case Face::sc: return "sc";
    case Face::lb: return "lb";
    case Face::rb: return "rb";
    case Face::bf: return "bf";
  }
  return "?";
}

class IndexFamily {
 public:
  IndexFamily() = default;

  IndexSet& operator[](Face f) { return sets_[static_cast<std::size_t>(f)]; }
  const IndexSet& operator[](Face f) const { return sets_[static_cast<std::size_t>(f)]; }

  /// True when lb, rb and bf are all empty.
  bool decays_at_far_faces() const {
    return (*this)[Face::lb].is_empty() && (*this)[Face::rb].is_empty() && (*this)[Face::bf].is_empty();
  }

  friend bool operator==(const IndexFamily& a, const IndexFamily& b) {
    for (Face f : kAllFaces)
      if (!(a[f] == b[f])) return false;
    return true;
  }

 private:
  std::array<IndexSet, 8> sets_{};
};

/// Family with the given sets on the five low-energy faces and empty lb, rb, bf.
inline IndexFamily make_family(IndexSet zf, IndexSet bf0, IndexSet lb0, IndexSet rb0, IndexSet sc) {
  IndexFamily fam;
  fam[Face::zf] = std::move(zf);
  fam[Face::bf0] = std::move(bf0);
  fam[Face::lb0] = std::move(lb0);
  fam[Face::rb0] = std::move(rb0);
  fam[Face::sc] = std::move(sc);
  return fam;
}

/// Resolvent family for n >= 3: 0 at sc, n - 2 at bf0, rb0, lb0, and 0 at zf.
inline IndexFamily low_energy_resolvent_family(int n) {
  if (n < 2) throw InvalidGeometry("dimension must be at least 2");
  const IndexSet zero({{0.0, 0}});
  const IndexSet mid({{static_cast<double>(n - 2), 0}});
  return make_family(zero, mid, mid, mid, zero);
}

/// Two-dimensional resolvent family: logarithmic growth at zf.
inline IndexFamily low_energy_resolvent_family_2d() {
  const IndexSet zero({{0.0, 0}});
  return make_family(IndexSet({{0.0, 1}}), zero, zero, zero, zero);
}

/// Index family of a composition, by the five composition formulas.
inline IndexFamily compose_families(const IndexFamily& e, const IndexFamily& f) {
  IndexFamily g;
  g[Face::sc] = set_sum(e[Face::sc], f[Face::sc]);
  g[Face::zf] = extended_union(set_sum(e[Face::zf], f[Face::zf]), set_sum(e[Face::rb0], f[Face::lb0]));
  g[Face::bf0] = extended_union(set_sum(e[Face::bf0], f[Face::bf0]), set_sum(e[Face::lb0], f[Face::rb0]));
  g[Face::lb0] = extended_union(set_sum(e[Face::bf0], f[Face::lb0]), set_sum(e[Face::lb0], f[Face::zf]));
  g[Face::rb0] = extended_union(set_sum(e[Face::rb0], f[Face::bf0]), set_sum(e[Face::zf], f[Face::rb0]));
  // lb, rb, bf remain empty: infinite-order decay is absorbing.
  return g;
}

/// Long-time heat family from a resolvent family: sc unchanged, the four low-energy faces shifted
/// by 2. These are upper bounds (the heat index sets are contained in them). With the override,
/// orders below n at zf are raised to n.
inline IndexFamily heat_family_from_resolvent(const IndexFamily& r, int n, bool apply_override) {
  if (!r.decays_at_far_faces()) throw InvalidArgument("resolvent family must be empty at lb, rb and bf");
  IndexFamily h;
  h[Face::sc] = r[Face::sc];
  for (Face f : {Face::bf0, Face::rb0, Face::lb0, Face::zf}) h[f] = shift(r[f], 2.0);
  if (apply_override && !h[Face::zf].is_empty()) {
    std::vector<IndexPair> g;
    for (const auto& x : h[Face::zf].generators()) g.push_back(x.z < n ? IndexPair{static_cast<double>(n), 0} : x);
    h[Face::zf] = IndexSet(std::move(g), h[Face::zf].truncation());
  }
  return h;
}

struct LeadingOrder {
  Face face;
  std::optional<IndexPair> order;  // nullopt: infinite-order decay
};

inline std::vector<LeadingOrder> leading_order_table(const IndexFamily& fam) {
  std::vector<LeadingOrder> out;
  for (Face f : kAllFaces) out.push_back({f, fam[f].leading()});
  return out;
}

/// One line per face, "face: order", with " log" or " log^p" for log powers and "∞" when empty.
inline std::string render_table(const IndexFamily& fam) {
  std::ostringstream out;
  for (const auto& row : leading_order_table(fam)) {
    out << face_name(row.face) << ": ";
    if (!row.order) {
      out << "∞";
    } else {
      out << row.order->z;
      if (row.order->p == 1) out << " log";
      if (row.order->p > 1) out << " log^" << row.order->p;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace conic
