/* Copyright 2026 The detxai Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
// Throughput of the three hot paths on synthetic tiles: SLIC segmentation,
// a LIME explanation and one greedy deletion search.

#include <benchmark/benchmark.h>

#include "detxai/config.hpp"
#include "detxai/lime.hpp"
#include "detxai/perturb.hpp"
#include "detxai/pipeline.hpp"
#include "detxai/segmentation.hpp"
#include "detxai/synthetic.hpp"
#include "detxai/toy_detector.hpp"

namespace {

using namespace detxai;

SyntheticScene scene_of(int size) {
  SyntheticParams p;
  p.width = p.height = size;
  p.max_objects = 3;
  p.seed = 42;
  return make_scene(p, "bench");
}

void BM_Slic(benchmark::State& state) {
  const auto scene = scene_of(static_cast<int>(state.range(0)));
  const LabImage lab = to_lab(scene.image);
  SlicParams params;
  params.n_segments = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(slic(lab, params));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(scene.image.pixel_count()));
}
BENCHMARK(BM_Slic)->Args({128, 200})->Args({256, 200})->Args({512, 400})->Unit(benchmark::kMillisecond);

void BM_Lime(benchmark::State& state) {
  const auto scene = scene_of(128);
  RunConfig cfg;
  const SegmentMap seg = segment_image(scene.image, cfg);
  ToyDetector det;
  LimeParams params;
  params.n_samples = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(explain_lime(det, scene.image, seg, params));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Lime)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_GreedyDeletion(benchmark::State& state) {
  const auto scene = scene_of(128);
  RunConfig cfg;
  const SegmentMap seg = segment_image(scene.image, cfg);
  ToyDetector det;
  const DetectionSet dets = det.detect_one(scene.image);
  if (dets.empty()) {
    state.SkipWithError("scene has no detection");
    return;
  }
  PerturbationOp op;
  op.kind = static_cast<PerturbationKind>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(greedy_deletion(det, scene.image, dets[0], op, seg, cfg.search));
  }
  state.SetLabel(to_string(op.kind));
}
BENCHMARK(BM_GreedyDeletion)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
