// Copyright 2026 The SiamEDP Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include <random>

#include "siamedp/backbone.h"
#include "siamedp/layers.h"
#include "siamedp/model.h"
#include "siamedp/parallel.h"
#include "siamedp/siamese_head.h"
#include "siamedp/synth.h"

namespace siamedp {
namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Tensor t(shape);
  for (auto& v : t.vec()) v = u(rng);
  return t;
}

void BM_Conv3x3(benchmark::State& state) {
  set_worker_count(1);
  const int c = static_cast<int>(state.range(0)), extent = static_cast<int>(state.range(1));
  const Tensor x = random_tensor(Shape{1, c, extent, extent}, 1);
  const ConvParams<float> p{random_tensor(Shape{c, c, 3, 3}, 2), {}, 1};
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_forward(x, p));
  state.counters["FLOP/s"] = benchmark::Counter(2.0 * c * c * 9 * extent * extent,
                                                 benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Conv3x3)->Args({32, 48})->Args({64, 24})->Args({128, 12})->Unit(benchmark::kMicrosecond);

void BM_Backbone(benchmark::State& state) {
  set_worker_count(1);
  const bool folded = state.range(0) != 0;
  const auto backbone = Backbone<float>::build(BackboneConfig{}, 3);
  const FoldedBackbone f = fold_batchnorm(backbone);
  const Tensor x = random_tensor(Shape{1, 1, 96, 123}, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(folded ? f.forward(x) : extract_features(backbone, x, Mode::kEval));
  }
  state.SetLabel(folded ? "folded" : "unfolded");
}
BENCHMARK(BM_Backbone)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Similarity(benchmark::State& state) {
  const Tensor search = random_tensor(Shape{1, 128, 12, 16}, 5);
  const Tensor ref = random_tensor(Shape{1, 128, 3, 3}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(similarity_map(search, ref));
}
BENCHMARK(BM_Similarity)->Unit(benchmark::kMicrosecond);

void BM_Detect(benchmark::State& state) {
  set_worker_count(static_cast<int>(state.range(0)));
  const auto sample = synth_sample(SynthConfig{}, 0);
  const DetectorModel model = make_model(BackboneConfig{}, 7, GrayImage(24, 24, 128));
  const FoldedBackbone f = fold_batchnorm(model.backbone);
  for (auto _ : state) benchmark::DoNotOptimize(detect(model, sample.image, &f));
  set_worker_count(1);
}
BENCHMARK(BM_Detect)->Arg(1)->Arg(0)->ArgName("workers")->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace siamedp

BENCHMARK_MAIN();
