#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "s2v/conv.hpp"
#include "s2v/models.hpp"
#include "s2v/selfonn.hpp"
#include "s2v/signal.hpp"

namespace {

using namespace s2v;

Tensor<float> random_map(std::size_t channels, std::size_t length, std::mt19937_64& rng) {
  Tensor<float> t({channels, length});
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

// Args: channels, length.
void BM_Conv1d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto l = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(1);
  const auto x = random_map(c, l, rng);
  Tensor<float> w({c, c, 5});
  for (auto& v : w.values()) v = 0.01f;
  const std::vector<float> b(c, 0.0f);
  for (auto _ : state) benchmark::DoNotOptimize(conv1d(x, w, std::span<const float>(b), 2, 2));
}
BENCHMARK(BM_Conv1d)->Args({32, 2048})->Args({64, 512})->Unit(benchmark::kMicrosecond);

void BM_TransposedConv1d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto l = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(2);
  const auto x = random_map(c, l, rng);
  Tensor<float> w({c, c, 4});
  for (auto& v : w.values()) v = 0.01f;
  const std::vector<float> b(c, 0.0f);
  for (auto _ : state) benchmark::DoNotOptimize(transposed_conv1d(x, w, std::span<const float>(b), 2, 1));
}
BENCHMARK(BM_TransposedConv1d)->Args({32, 1024})->Args({64, 256})->Unit(benchmark::kMicrosecond);

// Args: Q.
void BM_GenerativeLayer(benchmark::State& state) {
  OperationalLayerConfig c;
  c.in_channels = 32;
  c.out_channels = 32;
  c.kernel = 5;
  c.stride = 2;
  c.padding = 2;
  c.q = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  const auto p = GenerativeLayerParams<float>::uniform(c, rng);
  const auto x = random_map(32, 2048, rng);
  for (auto _ : state) benchmark::DoNotOptimize(operational_layer_forward(x, c, p));
}
BENCHMARK(BM_GenerativeLayer)->Arg(1)->Arg(3)->Arg(5)->Unit(benchmark::kMicrosecond);

void BM_OpUNetForward(benchmark::State& state) {
  const auto model = OpUNet::build(OpUNetConfig{}, 4);
  std::mt19937_64 rng(4);
  const auto x = random_map(1, model.segment_length(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x));
}
BENCHMARK(BM_OpUNetForward)->Unit(benchmark::kMillisecond);

void BM_Spectrogram(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const auto x = random_map(1, 4096, rng);
  for (auto _ : state) benchmark::DoNotOptimize(spectrogram<float>(x.values()));
}
BENCHMARK(BM_Spectrogram)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
