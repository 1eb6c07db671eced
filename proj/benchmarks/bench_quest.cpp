#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "eigenshrink/mp_solver.hpp"
#include "eigenshrink/quest.hpp"

using namespace eigenshrink;

namespace {

// Population spectrum spread over [1, 10] with a cluster at the bottom, roughly the
// shape used in the Monte Carlo designs.
SpectrumVector test_spectrum(std::size_t p) {
  std::vector<double> t(p);
  for (std::size_t i = 0; i < p; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(p);
    t[i] = 1.0 + 9.0 * std::pow(u, 1.5);
  }
  return SpectrumVector(std::move(t));
}

ConcentrationContext context(std::size_t p, double c) {
  return ConcentrationContext(static_cast<std::int64_t>(std::llround(static_cast<double>(p) / c)),
                              static_cast<std::int64_t>(p));
}

}  // namespace

static void BM_FixedPoint(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const SpectrumVector t = test_spectrum(p);
  const ConcentrationContext ctx = context(p, 0.5);
  const std::complex<double> z(3.0, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(solve_mp_fixed_point(t, ctx, z));
}
BENCHMARK(BM_FixedPoint)->RangeMultiplier(4)->Range(25, 400);

static void BM_Support(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const SpectrumVector t = test_spectrum(p);
  const ConcentrationContext ctx = context(p, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(compute_support(t, ctx));
}
BENCHMARK(BM_Support)->RangeMultiplier(4)->Range(25, 400)->Unit(benchmark::kMicrosecond);

static void BM_QuestQuantiles(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const double c = static_cast<double>(state.range(1)) / 10.0;
  const SpectrumVector t = test_spectrum(p);
  const ConcentrationContext ctx = context(p, c);
  for (auto _ : state) benchmark::DoNotOptimize(quest_quantiles(t, ctx));
}
BENCHMARK(BM_QuestQuantiles)
    ->ArgsProduct({{50, 100, 200}, {5, 20}})
    ->Unit(benchmark::kMillisecond);

static void BM_QuestJacobian(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const SpectrumVector t = test_spectrum(p);
  const ConcentrationContext ctx = context(p, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(quest_jacobian(t, ctx));
}
BENCHMARK(BM_QuestJacobian)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);
