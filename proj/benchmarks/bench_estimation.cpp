#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "eigenshrink/shrinkage.hpp"
#include "eigenshrink/sim_harness.hpp"
#include "eigenshrink/spectrum_estimator.hpp"

using namespace eigenshrink;

namespace {

struct Case {
  SpectrumVector tau;
  ConcentrationContext ctx;
  Eigensystem eig;
};

Case make_case(std::size_t p, std::int64_t n) {
  std::vector<double> t(p);
  for (std::size_t i = 0; i < p; ++i) t[i] = i < p / 5 ? 1.0 : (i < 4 * p / 5 ? 3.0 : 10.0);
  SpectrumVector tau(std::move(t));
  ConcentrationContext ctx(n, static_cast<std::int64_t>(p));
  Eigensystem eig = simulate_sample(tau, ctx, GaussianLaw{}, 7);
  return {std::move(tau), ctx, std::move(eig)};
}

}  // namespace

static void BM_EstimateSpectrum(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const Case k = make_case(p, 2 * static_cast<std::int64_t>(p));
  EstimationOptions opts;
  opts.objective_tolerance = 1e-6;
  for (auto _ : state) benchmark::DoNotOptimize(estimate_spectrum(k.eig.eigenvalues, k.ctx, opts));
}
BENCHMARK(BM_EstimateSpectrum)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_NonlinearShrinkage(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const Case k = make_case(p, 2 * static_cast<std::int64_t>(p));
  for (auto _ : state) benchmark::DoNotOptimize(nonlinear_shrinkage(k.eig, k.tau));
}
BENCHMARK(BM_NonlinearShrinkage)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_LinearShrinkage(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const std::int64_t n = 2 * state.range(0);
  const Eigen::MatrixXd y = draw_variates(n, static_cast<std::int64_t>(p), GaussianLaw{}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(linear_shrinkage(y));
}
BENCHMARK(BM_LinearShrinkage)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMicrosecond);
