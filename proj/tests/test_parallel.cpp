#include <gtest/gtest.h>

#include <cstdlib>
#include <numbers>
#include <stdexcept>
#include <string>

#include "conic/asymptotic_lab.hpp"
#include "conic/parallel.hpp"
#include "conic/renormalization.hpp"
#include "support.hpp"

using namespace conic;
constexpr double kPi = std::numbers::pi;

namespace {

// Sets CONIC_THREADS for the lifetime of the object.
class ThreadEnv {
 public:
  explicit ThreadEnv(const std::string& value) {
    if (const char* old = std::getenv(kThreadEnvVar)) saved_ = old;
    setenv(kThreadEnvVar, value.c_str(), 1);
  }
  ~ThreadEnv() {
    if (saved_)
      setenv(kThreadEnvVar, saved_->c_str(), 1);
    else
      unsetenv(kThreadEnvVar);
  }

 private:
  std::optional<std::string> saved_;
};

TraceSweep sweep_with(const std::string& threads) {
  ThreadEnv env(threads);
  const TraceIntegrator integ(cone_trace_source(ConeGeometry::over_circle(1.5 * kPi)));
  return trace_sweep(integ, 1.0, Cutoff::smooth(0.6, 1.9));
}

}  // namespace

TEST(ThreadCount, ReadsEnvironment) {
  {
    ThreadEnv env("3");
    EXPECT_EQ(thread_count(), 3u);
  }
  {
    ThreadEnv env("zero");
    EXPECT_GE(thread_count(), 1u);
  }
  {
    ThreadEnv env("0");
    EXPECT_GE(thread_count(), 1u);
  }
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (unsigned threads : {1u, 2u, 7u}) {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; }, threads);
    for (int h : hits) EXPECT_EQ(h, 1);
  }
  parallel_for(0, [](std::size_t) { FAIL(); }, 4);
}

TEST(ParallelFor, RethrowsLowestFailingIndex) {
  for (unsigned threads : {1u, 3u, 8u}) {
    try {
      parallel_for(
          200,
          [](std::size_t i) {
            if (i % 37 == 5) throw std::runtime_error("index " + std::to_string(i));
          },
          threads);
      FAIL() << "no exception";
    } catch (const std::runtime_error& e) {
      EXPECT_STREQ(e.what(), "index 5") << threads << " threads";
    }
  }
}

TEST(Determinism, TraceSweepIsBitIdenticalAcrossThreadCounts) {
  const auto one = sweep_with("1");
  for (const char* threads : {"2", "5"}) {
    const auto many = sweep_with(threads);
    ASSERT_EQ(one.values.size(), many.values.size());
    for (std::size_t i = 0; i < one.values.size(); ++i) EXPECT_EQ(one.values[i], many.values[i]) << threads;
  }
}

TEST(Determinism, SharedIntegratorGivesSameSweepInAnyOrder) {
  const TraceIntegrator integ(cone_trace_source(ConeGeometry::over_circle(3 * kPi)));
  TraceSweep forward, backward;
  {
    ThreadEnv env("4");
    forward = trace_sweep(integ, 2.0, Cutoff::sharp());
  }
  const TraceIntegrator fresh(cone_trace_source(ConeGeometry::over_circle(3 * kPi)));
  auto deltas = default_delta_grid(2.0);
  std::reverse(deltas.begin(), deltas.end());
  {
    ThreadEnv env("1");
    backward = trace_sweep(fresh, 2.0, Cutoff::sharp(), deltas);
  }
  for (std::size_t i = 0; i < deltas.size(); ++i)
    EXPECT_EQ(forward.values[i], backward.values[deltas.size() - 1 - i]);
}

TEST(Determinism, GaussianBoundFitAndOrderChecks) {
  const auto cone = ConeGeometry::over_circle(1.5 * kPi);
  conic_test::Rng rng(77);
  std::vector<HeatSample> samples;
  for (int i = 0; i < 40; ++i)
    samples.push_back({rng.log_uniform(0.05, 5.0),
                       {rng.uniform(0.2, 2.0), {rng.uniform(0.0, 1.5 * kPi)}},
                       {rng.uniform(0.2, 2.0), {rng.uniform(0.0, 1.5 * kPi)}}});
  GaussianBoundFit a, b;
  OrderCheck oa, ob;
  {
    ThreadEnv env("1");
    a = gaussian_bound_fit(cone, samples);
    oa = verify_heat_orders(cone, HeatRegime::bf0);
  }
  {
    ThreadEnv env("6");
    b = gaussian_bound_fit(cone, samples);
    ob = verify_heat_orders(cone, HeatRegime::bf0);
  }
  EXPECT_EQ(a.c1, b.c1);
  EXPECT_EQ(a.c2, b.c2);
  EXPECT_EQ(a.sweep, b.sweep);
  EXPECT_EQ(oa.fit.values, ob.fit.values);
  EXPECT_EQ(oa.fit.exponent, ob.fit.exponent);
}
