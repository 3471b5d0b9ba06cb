#include <benchmark/benchmark.h>

#include "m2p/kernels.hpp"
#include "m2p/rng.hpp"
#include "m2p/spatialstats.hpp"

namespace {

using namespace m2p;

PhaseMap random_map(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  PhaseMap m(n, n);
  for (auto& v : m.data()) v = rng.uniform() < 0.4 ? 1 : 0;
  return m;
}

GrayImage random_image(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  GrayImage g(n, n);
  for (auto& v : g.data()) v = rng.uniform();
  return g;
}

void BM_PairCountsSerial(benchmark::State& state) {
  const auto m = random_map(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::pair_counts(m, 1, 1, kernels::Boundary::Periodic));
}
void BM_PairCountsParallel(benchmark::State& state) {
  const auto m = random_map(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::parallel::pair_counts(m, 1, 1, kernels::Boundary::Periodic));
}
void BM_TwoPointFft(benchmark::State& state) {
  const auto m = random_map(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(two_point(m, CorrelationKind::autocorrelation(1), kernels::Boundary::Periodic));
  }
}
BENCHMARK(BM_PairCountsSerial)->Arg(16)->Arg(32)->Arg(48);
BENCHMARK(BM_PairCountsParallel)->Arg(16)->Arg(32)->Arg(48);
BENCHMARK(BM_TwoPointFft)->Arg(16)->Arg(32)->Arg(48)->Arg(256);

void BM_ResizeSerial(benchmark::State& state) {
  const auto g = random_image(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::bilinear_resize(g, 224, 224));
}
void BM_ResizeParallel(benchmark::State& state) {
  const auto g = random_image(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::parallel::bilinear_resize(g, 224, 224));
}
BENCHMARK(BM_ResizeSerial)->Arg(656);
BENCHMARK(BM_ResizeParallel)->Arg(656);

void BM_LocalMeanSerial(benchmark::State& state) {
  const auto g = random_image(256, 3);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::gaussian_local_mean(g, 11));
}
void BM_LocalMeanParallel(benchmark::State& state) {
  const auto g = random_image(256, 3);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::parallel::gaussian_local_mean(g, 11));
}
BENCHMARK(BM_LocalMeanSerial);
BENCHMARK(BM_LocalMeanParallel);

void BM_NlmSerial(benchmark::State& state) {
  const auto g = random_image(64, 4);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::nlm_denoise(g, 10.0 / 255.0, 7, 21));
}
void BM_NlmParallel(benchmark::State& state) {
  const auto g = random_image(64, 4);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::parallel::nlm_denoise(g, 10.0 / 255.0, 7, 21));
}
BENCHMARK(BM_NlmSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NlmParallel)->Unit(benchmark::kMillisecond);

void BM_SmoothSerial(benchmark::State& state) {
  Rng rng(5);
  std::vector<double> f(32 * 32 * 32);
  for (auto& v : f) v = rng.normal();
  for (auto _ : state) {
    auto copy = f;
    kernels::serial::gaussian_smooth_periodic(copy, 32, 32, 32, {2.0, 2.0, 2.0});
    benchmark::DoNotOptimize(copy.data());
  }
}
void BM_SmoothParallel(benchmark::State& state) {
  Rng rng(5);
  std::vector<double> f(32 * 32 * 32);
  for (auto& v : f) v = rng.normal();
  for (auto _ : state) {
    auto copy = f;
    kernels::parallel::gaussian_smooth_periodic(copy, 32, 32, 32, {2.0, 2.0, 2.0});
    benchmark::DoNotOptimize(copy.data());
  }
}
BENCHMARK(BM_SmoothSerial);
BENCHMARK(BM_SmoothParallel);

}  // namespace

BENCHMARK_MAIN();
