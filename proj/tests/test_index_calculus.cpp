#include <gtest/gtest.h>

#include "conic/index_calculus.hpp"
#include "support.hpp"

using namespace conic;

namespace conic {
void PrintTo(const IndexSet& e, std::ostream* os) { *os << e.str(); }
}  // namespace conic

namespace {

IndexSet random_set(conic_test::Rng& rng) {
  std::vector<IndexPair> g;
  const int count = rng.integer(0, 3);
  for (int i = 0; i < count; ++i) g.push_back({0.5 * rng.integer(-4, 8), rng.integer(0, 2)});
  return IndexSet(g);
}

// Every member of `inner` with order below `limit` is a member of `outer`.
bool subset_below(const IndexSet& inner, const IndexSet& outer, double limit) {
  for (double z = -4.0; z < limit; z += 0.5)
    for (int p = 0; p <= 6; ++p)
      if (inner.contains({z, p}) && !outer.contains({z, p})) return false;
  return true;
}

IndexPair lead(const IndexFamily& fam, Face f) { return fam[f].leading().value(); }

}  // namespace

TEST(IndexSet, ClosureMembership) {
  const IndexSet e({{0.5, 1}});
  EXPECT_TRUE(e.contains({0.5, 0}));
  EXPECT_TRUE(e.contains({3.5, 1}));
  EXPECT_FALSE(e.contains({1.0, 0}));
  EXPECT_FALSE(e.contains({-0.5, 0}));
  EXPECT_FALSE(e.contains({0.5, 2}));
  EXPECT_EQ(e.max_log_at(2.5), 1);
  EXPECT_FALSE(e.max_log_at(2.0).has_value());
}

TEST(IndexSet, NormalizationDropsDominatedGenerators) {
  const IndexSet e({{2.0, 0}, {0.0, 1}, {0.0, 1}, {0.5, 0}});
  ASSERT_EQ(e.generators().size(), 2u);
  EXPECT_EQ(e.generators()[0], (IndexPair{0.0, 1}));
  EXPECT_EQ(e.generators()[1], (IndexPair{0.5, 0}));
  EXPECT_EQ(e.str(), "{(0,1), (0.5,0)}");
  EXPECT_EQ(IndexSet::empty().str(), "{}");
}

TEST(IndexSet, Errors) {
  EXPECT_THROW(IndexSet({{0.0, -1}}), InvalidArgument);
  EXPECT_THROW(IndexSet({{std::nan(""), 0}}), InvalidArgument);
  EXPECT_THROW(IndexSet({{0.0, 0}}, 4.0).contains({4.0, 0}), InvalidArgument);
}

TEST(IndexSet, ExtendedUnionExamples) {
  const IndexSet zero({{0.0, 0}});
  EXPECT_EQ(extended_union(zero, zero), IndexSet({{0.0, 1}}));
  const auto e = extended_union(zero, IndexSet({{1.0, 0}}));
  EXPECT_TRUE(e.contains({0.0, 0}));
  EXPECT_FALSE(e.contains({0.0, 1}));
  EXPECT_TRUE(e.contains({1.0, 1}));
  EXPECT_TRUE(e.contains({5.0, 1}));
  EXPECT_EQ(extended_union(zero, IndexSet({{0.5, 0}})), IndexSet({{0.0, 0}, {0.5, 0}}));
}

TEST(IndexSet, SumAndShiftExamples) {
  EXPECT_EQ(set_sum(IndexSet({{0.5, 1}}), IndexSet({{1.0, 0}, {0.0, 2}})), IndexSet({{0.5, 3}}));
  EXPECT_TRUE(set_sum(IndexSet({{0.5, 1}}), IndexSet::empty()).is_empty());
  EXPECT_EQ(shift(IndexSet({{0.0, 1}}), 2.0), IndexSet({{2.0, 1}}));
  EXPECT_DOUBLE_EQ(shift(IndexSet({{0.0, 1}}, 10.0), 2.0).truncation(), 12.0);
}

TEST(IndexSetProperty, UnionLaws) {
  conic_test::Rng rng(101);
  for (int i = 0; i < 300; ++i) {
    const auto e = random_set(rng), f = random_set(rng), g = random_set(rng);
    EXPECT_EQ(set_union(e, f), set_union(f, e));
    EXPECT_EQ(set_union(e, e), e);
    EXPECT_EQ(set_union(set_union(e, f), g), set_union(e, set_union(f, g)));
    EXPECT_EQ(set_union(e, IndexSet::empty()), e);
    EXPECT_TRUE(subset_below(e, set_union(e, f), 10.0));
  }
}

TEST(IndexSetProperty, SumLaws) {
  conic_test::Rng rng(202);
  for (int i = 0; i < 300; ++i) {
    const auto e = random_set(rng), f = random_set(rng), g = random_set(rng);
    EXPECT_EQ(set_sum(e, f), set_sum(f, e));
    EXPECT_EQ(set_sum(set_sum(e, f), g), set_sum(e, set_sum(f, g)));
    EXPECT_EQ(set_sum(e, IndexSet({{0.0, 0}})), e);
    for (const auto& a : e.generators())
      for (const auto& b : f.generators()) EXPECT_TRUE(set_sum(e, f).contains({a.z + b.z, a.p + b.p}));
  }
}

TEST(IndexSetProperty, ShiftLaws) {
  conic_test::Rng rng(303);
  for (int i = 0; i < 300; ++i) {
    const auto e = random_set(rng);
    const double a = 0.5 * rng.integer(-4, 4), b = 0.5 * rng.integer(-4, 4);
    EXPECT_EQ(shift(shift(e, a), b), shift(e, a + b));
    EXPECT_EQ(shift(e, a), set_sum(e, IndexSet({{a, 0}})));
    for (double z = -4.0; z < 10.0; z += 0.5)
      for (int p = 0; p < 4; ++p) EXPECT_EQ(e.contains({z, p}), shift(e, a).contains({z + a, p}));
  }
}

TEST(IndexSetProperty, ExtendedUnionLaws) {
  conic_test::Rng rng(404);
  for (int i = 0; i < 300; ++i) {
    const auto e = random_set(rng), f = random_set(rng);
    const auto u = extended_union(e, f);
    EXPECT_EQ(u, extended_union(f, e));
    EXPECT_TRUE(subset_below(e, u, 10.0));
    EXPECT_TRUE(subset_below(f, u, 10.0));
    EXPECT_TRUE(subset_below(set_union(e, f), u, 10.0));
    EXPECT_EQ(extended_union(e, IndexSet::empty()), e);
    const auto g = random_set(rng);
    EXPECT_EQ(extended_union(extended_union(e, f), g), extended_union(e, extended_union(f, g)))
        << e.str() << " " << f.str() << " " << g.str();
    const double c = 0.5 * rng.integer(-3, 3);
    EXPECT_EQ(shift(u, c), extended_union(shift(e, c), shift(f, c)));
    for (double z = -4.0; z < 10.0; z += 0.5) {
      const auto pe = e.max_log_at(z), pf = f.max_log_at(z);
      if (pe && pf) EXPECT_TRUE(u.contains({z, *pe + *pf + 1})) << e.str() << " " << f.str() << " z=" << z;
    }
  }
}

TEST(IndexSetProperty, LeadingIsMinimal) {
  conic_test::Rng rng(505);
  for (int i = 0; i < 300; ++i) {
    const auto e = random_set(rng);
    if (e.is_empty()) {
      EXPECT_FALSE(e.leading().has_value());
      continue;
    }
    const auto l = *e.leading();
    for (const auto& g : e.generators()) EXPECT_LE(l.z, g.z);
    EXPECT_FALSE(e.contains({l.z, l.p + 1}));
  }
}

TEST(IndexFamily, ResolventTables) {
  const auto r3 = low_energy_resolvent_family(3);
  EXPECT_EQ(lead(r3, Face::zf), (IndexPair{0.0, 0}));
  EXPECT_EQ(lead(r3, Face::sc), (IndexPair{0.0, 0}));
  for (Face f : {Face::bf0, Face::lb0, Face::rb0}) EXPECT_EQ(lead(r3, f), (IndexPair{1.0, 0}));
  EXPECT_TRUE(r3.decays_at_far_faces());
  EXPECT_EQ(lead(low_energy_resolvent_family(5), Face::bf0), (IndexPair{3.0, 0}));
  const auto r2 = low_energy_resolvent_family_2d();
  EXPECT_EQ(lead(r2, Face::zf), (IndexPair{0.0, 1}));
  EXPECT_EQ(lead(r2, Face::bf0), (IndexPair{0.0, 0}));
  EXPECT_THROW(low_energy_resolvent_family(1), InvalidGeometry);
}

TEST(IndexFamily, HeatFromResolvent) {
  const auto h = heat_family_from_resolvent(low_energy_resolvent_family(3), 3, false);
  EXPECT_EQ(lead(h, Face::zf), (IndexPair{2.0, 0}));
  for (Face f : {Face::bf0, Face::lb0, Face::rb0}) EXPECT_EQ(lead(h, f), (IndexPair{3.0, 0}));
  EXPECT_EQ(lead(h, Face::sc), (IndexPair{0.0, 0}));
  const auto o = heat_family_from_resolvent(low_energy_resolvent_family(3), 3, true);
  EXPECT_EQ(lead(o, Face::zf), (IndexPair{3.0, 0}));
  EXPECT_EQ(lead(o, Face::bf0), (IndexPair{3.0, 0}));
  const auto h2 = heat_family_from_resolvent(low_energy_resolvent_family_2d(), 2, true);
  EXPECT_EQ(lead(h2, Face::zf), (IndexPair{2.0, 1}));
  auto bad = low_energy_resolvent_family(3);
  bad[Face::bf] = IndexSet({{0.0, 0}});
  EXPECT_THROW(heat_family_from_resolvent(bad, 3, false), InvalidArgument);
}

TEST(IndexFamily, CompositionOfResolvents) {
  const auto r = low_energy_resolvent_family(3);
  const auto c = compose_families(r, r);
  EXPECT_EQ(c[Face::sc], IndexSet({{0.0, 0}}));
  EXPECT_EQ(c[Face::zf], IndexSet({{0.0, 0}, {2.0, 1}}));
  EXPECT_EQ(c[Face::bf0], IndexSet({{2.0, 1}}));
  EXPECT_EQ(c[Face::lb0], IndexSet({{1.0, 0}, {2.0, 1}}));
  EXPECT_EQ(c[Face::rb0], IndexSet({{1.0, 0}, {2.0, 1}}));
  EXPECT_TRUE(c.decays_at_far_faces());
}

TEST(IndexFamily, IdentityLikeFamilyGainsALogAtZf) {
  const IndexSet zero({{0.0, 0}});
  const auto id = make_family(zero, zero, zero, zero, zero);
  const auto c = compose_families(id, id);
  EXPECT_EQ(c[Face::zf], IndexSet({{0.0, 0}, {0.0, 1}}));
  EXPECT_EQ(c[Face::sc], zero);
}

TEST(IndexFamilyProperty, CompositionIsMonotone) {
  conic_test::Rng rng(606);
  for (int i = 0; i < 100; ++i) {
    const auto e = make_family(random_set(rng), random_set(rng), random_set(rng), random_set(rng), random_set(rng));
    auto bigger = e;
    bigger[Face::zf] = set_union(e[Face::zf], random_set(rng));
    const auto f = make_family(random_set(rng), random_set(rng), random_set(rng), random_set(rng), random_set(rng));
    const auto small = compose_families(e, f), large = compose_families(bigger, f);
    for (Face face : kAllFaces) EXPECT_TRUE(subset_below(small[face], large[face], 10.0)) << face_name(face);
  }
}

TEST(IndexFamily, RenderTable) {
  const auto h = heat_family_from_resolvent(low_energy_resolvent_family_2d(), 2, false);
  EXPECT_EQ(render_table(h), "zf: 2 log\nbf0: 2\nlb0: 2\nrb0: 2\nsc: 0\nlb: ∞\nrb: ∞\nbf: ∞\n");
  auto fam = make_family(IndexSet({{1.5, 3}}), IndexSet(), IndexSet(), IndexSet(), IndexSet());
  EXPECT_EQ(render_table(fam).substr(0, 17), "zf: 1.5 log^3\nbf0");
  const auto rows = leading_order_table(fam);
  ASSERT_EQ(rows.size(), 8u);
  EXPECT_FALSE(rows[1].order.has_value());
}
