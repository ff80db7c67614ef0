// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "egsf/gaze.hpp"
#include "egsf/lif.hpp"
#include "egsf/metrics.hpp"
#include "egsf/model.hpp"
#include "egsf/ops.hpp"
#include "egsf/rng.hpp"

namespace egsf {
namespace {

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Tensor a = random_normal({n, n}, rng), b = random_normal({n, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(256);

void BM_ConvDepthwise(benchmark::State& state) {
  Rng rng(2);
  Tensor x = random_normal({16, 16, 32, 32}, rng), k = random_normal({16, 1, 3, 3}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::conv2d(x, k, {ConvMode::kDepthwise, 1, 1}));
}
BENCHMARK(BM_ConvDepthwise);

void BM_ConvPointwise(benchmark::State& state) {
  Rng rng(3);
  Tensor x = random_normal({16, 16, 32, 32}, rng), k = random_normal({16, 16, 1, 1}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::conv2d(x, k, {ConvMode::kPointwise, 1, 0}));
}
BENCHMARK(BM_ConvPointwise);

void BM_LifSequence(benchmark::State& state) {
  Rng rng(4);
  Tensor x = random_normal({4, 16 * 32 * 32}, rng, 1.5);
  for (auto _ : state) benchmark::DoNotOptimize(lif_sequence(x, LifParams{}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.numel()));
}
BENCHMARK(BM_LifSequence);

void BM_ModelForward(benchmark::State& state) {
  const auto B = static_cast<std::size_t>(state.range(0));
  EgSpikeFormer model(ModelConfig{}, LifParams{}, 5);
  Rng rng(5);
  auto images = make_var(random_uniform({B, 1, 32, 32}, rng, 0.0, 1.0));
  for (auto _ : state) {
    Tape tape(false);
    benchmark::DoNotOptimize(model.forward(tape, images, false).logits);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(B));
}
BENCHMARK(BM_ModelForward)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  EgSpikeFormer model(ModelConfig{}, LifParams{}, 6);
  Rng rng(6);
  auto images = make_var(random_uniform({16, 1, 32, 32}, rng, 0.0, 1.0));
  std::vector<std::size_t> labels(16);
  for (std::size_t i = 0; i < 16; ++i) labels[i] = i % 2;
  for (auto _ : state) {
    Tape tape;
    auto out = model.forward(tape, images, true);
    auto loss = softmax_cross_entropy(tape, out.logits, labels);
    tape.backward(loss);
  }
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_Heatmap(benchmark::State& state) {
  GazeRecord rec{"b", {{5, 7, 300}, {20, 22, 250}, {12, 3, 80}}};
  for (auto _ : state) benchmark::DoNotOptimize(heatmap_from_fixations(rec, 4.0, 32, 32));
}
BENCHMARK(BM_Heatmap);

void BM_Ssim(benchmark::State& state) {
  Rng rng(7);
  Tensor a = random_uniform({32, 32}, rng, 0.0, 1.0), b = random_uniform({32, 32}, rng, 0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim);

}  // namespace
}  // namespace egsf

BENCHMARK_MAIN();
