#include <benchmark/benchmark.h>

#include <vector>

#include "diffcon/basis.hpp"
#include "diffcon/distributions.hpp"
#include "diffcon/model.hpp"
#include "diffcon/sampler.hpp"
#include "diffcon/simulate.hpp"

namespace {

using namespace diffcon;

EventSeries bench_series(int t_max) {
  SimConfig config = SimConfig::constant_rates(t_max, 0.5, 0.6, DecayKernel{2.0, 1.5}, 2.0);
  config.rng_seed = 42;
  return simulate_hierarchical(config).series;
}

DesignMatrix time_design(int t_max) {
  std::vector<double> pts(static_cast<std::size_t>(t_max));
  for (int t = 0; t < t_max; ++t) pts[static_cast<std::size_t>(t)] = static_cast<double>(t);
  return build_basis(default_time_spec(t_max), pts);
}

void BM_NegBinomLogPmf(benchmark::State& state) {
  const NegBinomMeanScale d{2.0, 3.0};
  std::int64_t y = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(negbinom_logpmf(y, d));
    y = (y + 1) & 63;
  }
}
BENCHMARK(BM_NegBinomLogPmf);

void BM_GammaSample(benchmark::State& state) {
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(gamma_sample(2.5, 1.3, rng));
}
BENCHMARK(BM_GammaSample);

void BM_DecayWeights(benchmark::State& state) {
  const DecayKernel kernel{2.0, 1.5};
  for (auto _ : state) benchmark::DoNotOptimize(decay_weights(kernel));
}
BENCHMARK(BM_DecayWeights);

void BM_BuildBasis(benchmark::State& state) {
  const int t_max = static_cast<int>(state.range(0));
  std::vector<double> pts(static_cast<std::size_t>(t_max));
  for (int t = 0; t < t_max; ++t) pts[static_cast<std::size_t>(t)] = static_cast<double>(t);
  const BasisSpec spec = default_time_spec(t_max);
  for (auto _ : state) benchmark::DoNotOptimize(build_basis(spec, pts));
}
BENCHMARK(BM_BuildBasis)->Arg(365)->Arg(6209);

void BM_ContagionMean(benchmark::State& state) {
  const int t_max = static_cast<int>(state.range(0));
  const EventSeries s = bench_series(t_max);
  const Eigen::VectorXd delta = Eigen::VectorXd::Constant(t_max, 0.6);
  const DecayKernel kernel{2.0, 1.5};
  for (auto _ : state) benchmark::DoNotOptimize(contagion_mean(s, delta, kernel));
}
BENCHMARK(BM_ContagionMean)->Arg(2000)->Arg(6209);

void BM_SliceSampleNormal(benchmark::State& state) {
  Rng rng(7);
  const auto logf = [](double x) { return -0.5 * x * x; };
  double x = 0.0;
  for (auto _ : state) {
    x = slice_sample(logf, x, 1.0, Interval{}, rng);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_SliceSampleNormal);

void BM_GibbsSweep(benchmark::State& state) {
  const int t_max = static_cast<int>(state.range(0));
  const EventSeries s = bench_series(t_max);
  const DesignMatrix x = time_design(t_max);
  GibbsSampler sampler(s, x, x, ChainConfig{});
  auto st = sampler.initial_state();
  Rng rng(3);
  for (auto _ : state) {
    sampler.sweep(st, rng);
    benchmark::DoNotOptimize(st.params.sigma2);
  }
}
BENCHMARK(BM_GibbsSweep)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_SimulateHierarchical(benchmark::State& state) {
  SimConfig config = SimConfig::constant_rates(static_cast<int>(state.range(0)), 0.5, 0.6,
                                               DecayKernel{2.0, 1.5}, 2.0);
  for (auto _ : state) {
    config.rng_seed += 1;
    benchmark::DoNotOptimize(simulate_hierarchical(config));
  }
}
BENCHMARK(BM_SimulateHierarchical)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
