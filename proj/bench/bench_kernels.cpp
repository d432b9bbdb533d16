// Serial reference kernels against their OpenMP counterparts.
//   ./build/bench/bench_kernels --benchmark_filter=Conv
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "pauie/kernels.hpp"

namespace k = pauie::kernels;

namespace {

std::vector<double> random_vec(std::size_t n) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Args: spatial size, channels in = out.
k::ConvShape conv_shape(const benchmark::State& st) {
  const auto s = static_cast<std::size_t>(st.range(0)), c = static_cast<std::size_t>(st.range(1));
  return {2, c, s, s, c, 3};
}

template <auto Fn>
void BM_ConvForward(benchmark::State& st) {
  const auto s = conv_shape(st);
  const auto in = random_vec(s.input_size()), w = random_vec(s.weight_size()), b = random_vec(s.out_channels);
  std::vector<double> out(s.output_size());
  for (auto _ : st) {
    Fn(s, in, w, b, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(s.output_size() * s.in_channels * 9));
}

template <auto Fn>
void BM_ConvBackwardInput(benchmark::State& st) {
  const auto s = conv_shape(st);
  const auto g = random_vec(s.output_size()), w = random_vec(s.weight_size());
  std::vector<double> gi(s.input_size());
  for (auto _ : st) {
    Fn(s, g, w, gi);
    benchmark::DoNotOptimize(gi.data());
  }
}

template <auto Fn>
void BM_ConvBackwardWeight(benchmark::State& st) {
  const auto s = conv_shape(st);
  const auto in = random_vec(s.input_size()), g = random_vec(s.output_size());
  std::vector<double> gw(s.weight_size()), gb(s.out_channels);
  for (auto _ : st) {
    Fn(s, in, g, gw, gb);
    benchmark::DoNotOptimize(gw.data());
  }
}

template <auto Fn>
void BM_Blur(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto src = random_vec(n * n);
  std::vector<double> dst(n * n);
  for (auto _ : st) {
    Fn(src, n, n, 5.0, dst);
    benchmark::DoNotOptimize(dst.data());
  }
}

template <auto Fn>
void BM_Window(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto src = random_vec(n * n);
  std::vector<double> dst(n * n);
  for (auto _ : st) {
    Fn(src, n, n, 7, dst);
    benchmark::DoNotOptimize(dst.data());
  }
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({32, 16})->Args({64, 32})->Args({128, 16})->Unit(benchmark::kMillisecond);
}

void image_args(benchmark::internal::Benchmark* b) {
  b->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_ConvForward<k::ref::conv2d_forward>)->Name("ConvForward/ref")->Apply(conv_args);
BENCHMARK(BM_ConvForward<k::omp::conv2d_forward>)->Name("ConvForward/omp")->Apply(conv_args);
BENCHMARK(BM_ConvBackwardInput<k::ref::conv2d_backward_input>)->Name("ConvBackwardInput/ref")->Apply(conv_args);
BENCHMARK(BM_ConvBackwardInput<k::omp::conv2d_backward_input>)->Name("ConvBackwardInput/omp")->Apply(conv_args);
BENCHMARK(BM_ConvBackwardWeight<k::ref::conv2d_backward_weight>)->Name("ConvBackwardWeight/ref")->Apply(conv_args);
BENCHMARK(BM_ConvBackwardWeight<k::omp::conv2d_backward_weight>)->Name("ConvBackwardWeight/omp")->Apply(conv_args);
BENCHMARK(BM_Blur<k::ref::gaussian_blur>)->Name("GaussianBlur/ref")->Apply(image_args);
BENCHMARK(BM_Blur<k::omp::gaussian_blur>)->Name("GaussianBlur/omp")->Apply(image_args);
BENCHMARK(BM_Window<k::ref::min_filter>)->Name("MinFilter/ref")->Apply(image_args);
BENCHMARK(BM_Window<k::omp::min_filter>)->Name("MinFilter/omp")->Apply(image_args);
BENCHMARK(BM_Window<k::ref::box_mean>)->Name("BoxMean/ref")->Apply(image_args);
BENCHMARK(BM_Window<k::omp::box_mean>)->Name("BoxMean/omp")->Apply(image_args);

BENCHMARK_MAIN();
