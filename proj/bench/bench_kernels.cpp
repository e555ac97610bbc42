#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "mosaic/numerics/kernels.hpp"
#include "mosaic/numerics/runtime.hpp"
#include "mosaic/pipeline/sample.hpp"
#include "mosaic/pipeline/train.hpp"

namespace k = mosaic::kernels;

namespace {

std::vector<double> noise(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

using Gemm = void (*)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t, bool);

// Attention-score shaped product: (rows x d) * (rows x d)^T.
template <Gemm F>
void BM_gemm_nt(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0)), d = static_cast<std::size_t>(st.range(1));
  const auto a = noise(n * d, 1), b = noise(n * d, 2);
  std::vector<double> c(n * n);
  for (auto _ : st) {
    F(a.data(), b.data(), c.data(), n, d, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * n * n * d));
}

template <Gemm F>
void BM_gemm_nn(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0)), d = static_cast<std::size_t>(st.range(1));
  const auto a = noise(n * d, 3), b = noise(d * 4 * d, 4);
  std::vector<double> c(n * 4 * d);
  for (auto _ : st) {
    F(a.data(), b.data(), c.data(), n, d, 4 * d, false);
    benchmark::DoNotOptimize(c.data());
  }
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * n * d * 4 * d));
}

template <void (*F)(const double*, double*, std::size_t, std::size_t)>
void BM_softmax(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto x = noise(n * n, 5);
  std::vector<double> y(n * n);
  for (auto _ : st) {
    F(x.data(), y.data(), n, n);
    benchmark::DoNotOptimize(y.data());
  }
}

template <void (*F)(const double*, double*, double*, std::size_t, std::size_t, double)>
void BM_layer_norm(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0)), d = static_cast<std::size_t>(st.range(1));
  const auto x = noise(n * d, 6);
  std::vector<double> y(n * d), r(n);
  for (auto _ : st) {
    F(x.data(), y.data(), r.data(), n, d, 1e-6);
    benchmark::DoNotOptimize(y.data());
  }
}

// One full sampling pass of the acceptance-width model.
void BM_sample(benchmark::State& st) {
  const k::ScopedMode mode(st.range(0) ? k::Mode::Parallel : k::Mode::Serial);
  mosaic::pipeline::Model model(mosaic::pipeline::ModelConfig{});
  const auto s = mosaic::synth::make_dataset(1, 1).front();
  mosaic::pipeline::SampleRequest req;
  req.text = s.text;
  req.conditions = mosaic::pipeline::condition_inputs(
      s, {mosaic::synth::kAllConditions.begin(), mosaic::synth::kAllConditions.end()});
  req.steps = 2;
  for (auto _ : st) benchmark::DoNotOptimize(mosaic::pipeline::sample(model, req).image.data().data());
}

}  // namespace

// 256 image + 8 text tokens at widths 16 and 64; 1280 covers the 4-condition ISB rows.
#define SHAPES ->Args({264, 16})->Args({264, 64})->Args({1280, 16})
BENCHMARK_TEMPLATE(BM_gemm_nt, k::serial::gemm_nt) SHAPES;
BENCHMARK_TEMPLATE(BM_gemm_nt, k::parallel::gemm_nt) SHAPES;
BENCHMARK_TEMPLATE(BM_gemm_nn, k::serial::gemm_nn) SHAPES;
BENCHMARK_TEMPLATE(BM_gemm_nn, k::parallel::gemm_nn) SHAPES;
BENCHMARK_TEMPLATE(BM_layer_norm, k::serial::layer_norm_rows) SHAPES;
BENCHMARK_TEMPLATE(BM_layer_norm, k::parallel::layer_norm_rows) SHAPES;
BENCHMARK_TEMPLATE(BM_softmax, k::serial::softmax_rows)->Arg(264)->Arg(1280);
BENCHMARK_TEMPLATE(BM_softmax, k::parallel::softmax_rows)->Arg(264)->Arg(1280);
BENCHMARK(BM_sample)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  mosaic::tune_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
