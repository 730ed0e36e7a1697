// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <benchmark/benchmark.h>

#include "evd/metrics.hpp"
#include "evd/mosaic.hpp"
#include "evd/swin.hpp"
#include "evd/synthetic.hpp"
#include "evd/train.hpp"

namespace {

using namespace evd;

Tensor filled(Shape shape, std::uint64_t seed, bool grad = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v), grad);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = filled({n, n}, 1), b = filled({n, n}, 2);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

void BM_MatmulBackward(benchmark::State& state) {
  Tensor a = filled({256, 64}, 1, true), b = filled({64, 256}, 2, true);
  for (auto _ : state) {
    backward(sum(matmul(a, b)));
    a.zero_grad();
    b.zero_grad();
  }
}
BENCHMARK(BM_MatmulBackward);

void BM_TinyForward(benchmark::State& state) {
  const auto extent = static_cast<std::size_t>(state.range(0));
  const auto cfg = swin::preset(swin::Preset::Tiny);
  const auto params = swin::init_params(cfg);
  const Tensor raw = filled({extent, extent, 1}, 3);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(swin::forward(raw, params, cfg));
}
BENCHMARK(BM_TinyForward)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto model = swin::preset(swin::Preset::Tiny);
  const auto data = synthetic::make_dataset(1, 64, 64, 7, make_hybridevs_pattern());
  train::TrainConfig cfg = train::TrainConfig::desk();
  cfg.stage1_epochs = 1;
  cfg.stage2_epochs = 0;
  for (auto _ : state) benchmark::DoNotOptimize(train::two_stage_train(model, data, cfg));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_BilinearDemosaic(benchmark::State& state) {
  const auto gt = synthetic::smooth_gradient(256, 256, 1);
  const auto raw = mosaic(gt, make_hybridevs_pattern());
  for (auto _ : state) benchmark::DoNotOptimize(bilinear_demosaic(raw));
}
BENCHMARK(BM_BilinearDemosaic)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  const auto a = synthetic::smooth_gradient(256, 256, 1);
  const auto b = synthetic::edge_scene(256, 256, 2);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::ssim(a, b));
}
BENCHMARK(BM_Ssim)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
