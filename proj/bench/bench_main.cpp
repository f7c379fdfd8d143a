#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "gpkf/filter.hpp"
#include "gpkf/gp.hpp"
#include "gpkf/kernels.hpp"
#include "gpkf/sim.hpp"

namespace {

using namespace gpkf;

std::vector<TimeIndex> consecutive_times(std::size_t n) {
  std::vector<TimeIndex> times(n);
  std::iota(times.begin(), times.end(), TimeIndex{1});
  return times;
}

void BM_GramSerial(benchmark::State& state) {
  const KernelSpec k(KernelFamily::Matern52, 1.0, 10.0);
  const auto times = consecutive_times(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(gram_serial(k, times));
}

void BM_GramParallel(benchmark::State& state) {
  const KernelSpec k(KernelFamily::Matern52, 1.0, 10.0);
  const auto times = consecutive_times(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(gram(k, times));
}

BENCHMARK(BM_GramSerial)->Arg(256)->Arg(1024)->Arg(2048);
BENCHMARK(BM_GramParallel)->Arg(256)->Arg(1024)->Arg(2048);

std::vector<double> white_series(std::size_t n) {
  const auto r = sample_gp({KernelFamily::White, 1.0}, n, 1, 11);
  return {r.values.data(), r.values.data() + r.values.size()};
}

void BM_AcfSerial(benchmark::State& state) {
  const auto x = white_series(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(acf_serial(x, 200));
}

void BM_AcfParallel(benchmark::State& state) {
  const auto x = white_series(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(acf(x, 200));
}

BENCHMARK(BM_AcfSerial)->Arg(10000)->Arg(100000);
BENCHMARK(BM_AcfParallel)->Arg(10000)->Arg(100000);

void BM_LikelihoodLevinson(benchmark::State& state) {
  const KernelSpec k(KernelFamily::Exponential, 1.0, 20.0);
  const auto r = sample_gp(k, static_cast<std::size_t>(state.range(0)), 3, 5);
  for (auto _ : state) benchmark::DoNotOptimize(log_marginal_likelihood(k, r));
}

void BM_LikelihoodDense(benchmark::State& state) {
  const KernelSpec k(KernelFamily::Exponential, 1.0, 20.0);
  const auto r = sample_gp(k, static_cast<std::size_t>(state.range(0)), 3, 5);
  for (auto _ : state) benchmark::DoNotOptimize(log_marginal_likelihood_dense(k, r));
}

BENCHMARK(BM_LikelihoodLevinson)->Arg(250)->Arg(500)->Arg(1000);
BENCHMARK(BM_LikelihoodDense)->Arg(250)->Arg(500)->Arg(1000);

// Steady-state filter steps on the scalar scenario: the window is filled
// before timing starts and each iteration advances one step.
template <bool Fast>
void BM_FilterStep(benchmark::State& state) {
  const Scenario sc = scenario_paper_v();
  const auto window = static_cast<std::size_t>(state.range(0));
  const std::size_t horizon = 4 * window + 512;
  const auto sim = simulate(sc.model, sc.kernel, horizon, 9);
  const auto& z = sim.measurements;

  FilterState s = FilterState::initial(sc.model, window, z.start_time - 1);
  Eigen::Index i = 0;
  auto advance = [&] {
    auto r = Fast ? gpkf_step_windowed_fast(sc.model, sc.kernel, std::move(s), z.row(i))
                  : gpkf_step(sc.model, sc.kernel, std::move(s), z.row(i));
    s = std::move(r.state);
    ++i;
  };
  for (std::size_t w = 0; w < window; ++w) advance();
  const Eigen::Index warm = i;

  for (auto _ : state) {
    if (i == z.length()) {
      state.PauseTiming();
      s = FilterState::initial(sc.model, window, z.start_time - 1);
      for (i = 0; i < warm;) advance();
      state.ResumeTiming();
    }
    advance();
  }
}

BENCHMARK_TEMPLATE(BM_FilterStep, true)->RangeMultiplier(2)->Range(8, 128);
BENCHMARK_TEMPLATE(BM_FilterStep, false)->RangeMultiplier(2)->Range(8, 128);

}  // namespace

BENCHMARK_MAIN();
