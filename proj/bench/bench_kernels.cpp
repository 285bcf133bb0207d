// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "sdc/kernels/conv.hpp"
#include "sdc/kernels/densify.hpp"
#include "sdc/kernels/knn.hpp"

using namespace sdc::kernels;

namespace {

std::vector<float> random_floats(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1, 1);
  std::vector<float> v(n);
  for (float& x : v) x = u(rng);
  return v;
}

// batch 8, 32 -> 32 channels, 3x3 at 64x64
ConvGeometry conv_geometry() { return {8, 32, 64, 64, 32, 3, 1, 1}; }

template <bool Reference>
void BM_ConvForward(benchmark::State& st) {
  const ConvGeometry g = conv_geometry();
  const auto x = random_floats(std::size_t(g.batch) * g.in_channels * g.height * g.width, 1);
  const auto w = random_floats(std::size_t(g.out_channels) * g.in_channels * 9, 2);
  const auto b = random_floats(g.out_channels, 3);
  std::vector<float> y(std::size_t(g.batch) * g.out_channels * g.out_height() * g.out_width());
  for (auto _ : st) {
    if constexpr (Reference)
      reference::conv2d_forward(g, x.data(), w.data(), b.data(), y.data());
    else
      conv2d_forward(g, x.data(), w.data(), b.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Reference>
void BM_ConvBackward(benchmark::State& st) {
  const ConvGeometry g = conv_geometry();
  const std::size_t nx = std::size_t(g.batch) * g.in_channels * g.height * g.width;
  const auto x = random_floats(nx, 1);
  const auto w = random_floats(std::size_t(g.out_channels) * g.in_channels * 9, 2);
  const auto dy = random_floats(std::size_t(g.batch) * g.out_channels * g.out_height() * g.out_width(), 3);
  std::vector<float> dx(nx), dw(w.size()), db(g.out_channels);
  for (auto _ : st) {
    if constexpr (Reference)
      reference::conv2d_backward(g, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    else
      conv2d_backward(g, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    benchmark::DoNotOptimize(dx.data());
  }
}

template <bool Reference>
void BM_MinFill(benchmark::State& st) {
  const int n = 1024;
  std::mt19937 rng(4);
  std::uniform_real_distribution<float> u(0, 1);
  std::vector<float> in(std::size_t(n) * n), out(in.size());
  for (float& v : in) v = u(rng) < 0.05f ? 100 + 100 * u(rng) : 0.f;
  for (auto _ : st) {
    if constexpr (Reference)
      reference::min_fill_pass(in, out, n, n, 5);
    else
      min_fill_pass(in, out, n, n, 5);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Reference>
void BM_Knn(benchmark::State& st) {
  const int n = 4000;
  std::mt19937 rng(5);
  std::normal_distribution<double> d(0, 1);
  std::vector<double> xyz(3 * n), out(n);
  for (double& v : xyz) v = d(rng);
  for (auto _ : st) {
    if constexpr (Reference)
      reference::knn_mean_distance(xyz, 20, out);
    else
      knn_mean_distance(xyz, 20, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/reference")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/reference")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MinFill<false>)->Name("min_fill/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MinFill<true>)->Name("min_fill/reference")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Knn<false>)->Name("knn/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Knn<true>)->Name("knn/reference")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
