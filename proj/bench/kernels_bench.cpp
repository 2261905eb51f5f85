// OpenMP kernels against their serial reference twins.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "spoc/kernels.hpp"

namespace {

namespace k = spoc::kernels;

template <typename T>
std::vector<T> noise(std::size_t n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(u(gen));
  return v;
}

// A 512 x 37 x 37 map, the size of the largest conv5 maps in the corpus.
constexpr std::size_t kChannels = 512, kCells = 37 * 37;
// 100k descriptors of 256 dims for search, 100k 64-d points for distances.
constexpr std::size_t kRows = 100000, kDescDim = 256, kPointDim = 64;

template <auto Fn>
void weighted_sums(benchmark::State& state) {
  const auto data = noise<float>(kChannels * kCells, 1);
  const auto w = noise<double>(kCells, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(data, kChannels, kCells, w));
  state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(data.size() * sizeof(float)));
}

template <auto Fn>
void channel_max(benchmark::State& state) {
  const auto data = noise<float>(kChannels * kCells, 1);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(data, kChannels, kCells));
  state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(data.size() * sizeof(float)));
}

template <auto Fn>
void row_dots(benchmark::State& state) {
  const auto rows = noise<float>(kRows * kDescDim, 3);
  const auto q = noise<double>(kDescDim, 4);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(rows, kDescDim, q));
  state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(rows.size() * sizeof(float)));
}

template <auto Fn>
void squared_distances(benchmark::State& state) {
  const auto rows = noise<double>(kRows * kPointDim, 5);
  const auto q = noise<double>(kPointDim, 6);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(rows, kPointDim, q));
  state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(rows.size() * sizeof(double)));
}

}  // namespace

BENCHMARK(weighted_sums<k::reference::weighted_channel_sums>)->Name("weighted_channel_sums/serial")->UseRealTime();
BENCHMARK(weighted_sums<k::weighted_channel_sums>)->Name("weighted_channel_sums/openmp")->UseRealTime();
BENCHMARK(channel_max<k::reference::channel_max>)->Name("channel_max/serial")->UseRealTime();
BENCHMARK(channel_max<k::channel_max>)->Name("channel_max/openmp")->UseRealTime();
BENCHMARK(row_dots<k::reference::row_dots>)->Name("row_dots/serial")->UseRealTime();
BENCHMARK(row_dots<k::row_dots>)->Name("row_dots/openmp")->UseRealTime();
BENCHMARK(squared_distances<k::reference::squared_distances>)->Name("squared_distances/serial")->UseRealTime();
BENCHMARK(squared_distances<k::squared_distances>)->Name("squared_distances/openmp")->UseRealTime();

BENCHMARK_MAIN();
