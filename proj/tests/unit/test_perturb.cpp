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
#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "detxai/errors.hpp"
#include "detxai/perturb.hpp"
#include "detxai/random.hpp"
#include "detxai/toy_detector.hpp"
#include "fixtures.hpp"

namespace detxai {
namespace {

using testing::FunctionDetector;
using testing::grid_segments;
using testing::paint;
using testing::permissive_config;
using testing::solid;

PerturbationOp make_op(PerturbationKind kind) {
  PerturbationOp op;
  op.kind = kind;
  return op;
}

std::size_t mask_count(const Grid<std::uint8_t>& m) {
  return static_cast<std::size_t>(std::count(m.values().begin(), m.values().end(), 1));
}

TEST(PerturbationMask, DilationBySquareElement) {
  const SegmentMap seg = grid_segments(solid(40, 40, 0.5f), 4, 4);  // 10x10 tiles
  const int id = 5;                                                 // rows 10..19, cols 10..19
  EXPECT_EQ(mask_count(perturbation_mask(seg, std::span(&id, 1), 0)), 100u);
  EXPECT_EQ(mask_count(perturbation_mask(seg, std::span(&id, 1), 2)), 196u);
  const int corner = 0;
  EXPECT_EQ(mask_count(perturbation_mask(seg, std::span(&corner, 1), 2)), 144u);
  const std::vector<int> both{0, 5};
  EXPECT_EQ(mask_count(perturbation_mask(seg, both, 2)), 196u + 144u - 16u);
}

TEST(ApplyPerturbation, MaskBlackIsExactZeroAndLocal) {
  Rng rng(1);
  ImageBuffer img(30, 30);
  for (auto& v : img.values()) v = static_cast<float>(rng.uniform(0.05, 1.0));
  const SegmentMap seg = grid_segments(img, 3, 3);
  const std::vector<int> ids{4};
  const PerturbationOp op = make_op(PerturbationKind::kMaskBlack);
  const ImageBuffer out = apply_perturbation(img, ids, seg, op);
  const auto mask = perturbation_mask(seg, ids, op.mask_dilation_px);
  for (int r = 0; r < 30; ++r) {
    for (int c = 0; c < 30; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        if (mask.at(r, c)) {
          EXPECT_EQ(out.at(r, c, ch), 0.0f);
        } else {
          EXPECT_EQ(out.at(r, c, ch), img.at(r, c, ch));
        }
      }
    }
  }
}

TEST(ApplyPerturbation, MaskMeanUsesImageMean) {
  ImageBuffer img = solid(20, 20, 0.2f);
  paint(img, 0, 0, 10, 20, 0.6f);
  const SegmentMap seg = grid_segments(img, 2, 2);
  const std::vector<int> ids{3};
  const ImageBuffer out = apply_perturbation(img, ids, seg, make_op(PerturbationKind::kMaskMean));
  EXPECT_NEAR(out.at(15, 15, 0), 0.4f, 1e-6);
  EXPECT_NEAR(out.at(15, 15, 2), 0.4f, 1e-6);
  EXPECT_EQ(out.at(2, 2, 1), 0.6f);
}

TEST(ApplyPerturbation, NoiseBlendEndpoints) {
  Rng rng(2);
  ImageBuffer img(64, 64);
  for (auto& v : img.values()) v = static_cast<float>(rng.uniform());
  const SegmentMap seg = grid_segments(img, 2, 2);
  const std::vector<int> ids{0, 1};  // top half plus dilation
  PerturbationOp op = make_op(PerturbationKind::kNoise);
  op.noise_level = 0.0;
  EXPECT_EQ(apply_perturbation(img, ids, seg, op), img);

  const ImageBuffer constant = solid(64, 64, 0.9f);
  op.noise_level = 1.0;
  op.noise_seed = 42;
  const ImageBuffer out = apply_perturbation(constant, ids, seg, op);
  double sum = 0.0, sq = 0.0;
  int n = 0;
  for (int r = 0; r < 32; ++r) {
    for (int c = 0; c < 64; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        const double v = out.at(r, c, ch);
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
        sum += v;
        sq += v * v;
        ++n;
      }
    }
  }
  ASSERT_GE(n, 1000);
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.5, 0.05);
  EXPECT_NEAR(sq / n - mean * mean, 1.0 / 12.0, 0.02);
  EXPECT_EQ(out.at(50, 10, 0), 0.9f);
  EXPECT_EQ(apply_perturbation(constant, ids, seg, op), out);
  op.noise_seed = 43;
  EXPECT_NE(apply_perturbation(constant, ids, seg, op), out);

  op.noise_level = 0.6;
  op.noise_seed = 42;
  const ImageBuffer blend = apply_perturbation(constant, ids, seg, op);
  for (int c = 0; c < 64; ++c) {
    EXPECT_NEAR(blend.at(5, c, 1), 0.4 * 0.9 + 0.6 * out.at(5, c, 1), 1e-5);
  }
}

TEST(ApplyPerturbation, BlurOnlyInsideMask) {
  ImageBuffer img = solid(40, 40, 1.0f);
  paint(img, 10, 10, 30, 30, 0.0f);
  const SegmentMap seg = grid_segments(img, 2, 2);
  const std::vector<int> ids{0};
  const ImageBuffer out = apply_perturbation(img, ids, seg, make_op(PerturbationKind::kBlur));
  EXPECT_GT(out.at(10, 10, 0), 0.0f);  // edge pixel inside the mask gets mixed
  EXPECT_EQ(out.at(25, 25, 0), 0.0f);   // outside the dilated mask
  EXPECT_EQ(out.at(35, 5, 0), 1.0f);
}

TEST(EligibleRegion, Examples) {
  const ImageBuffer img = solid(60, 40, 0.5f);
  const SegmentMap seg = grid_segments(img, 3, 2);  // ids 0 1 / 2 3 / 4 5
  SearchConfig cfg;
  cfg.min_region_segments = 2;
  EXPECT_EQ(eligible_region(seg, Box(20, 20, 40, 60), cfg), (std::vector<int>{3, 5}));

  // Tiny box inside tile 0 of a 2x2 grid; the ring reaches all four tiles.
  const SegmentMap quad = grid_segments(solid(40, 40, 0.5f), 2, 2);
  SearchConfig def;
  ASSERT_EQ(def.ring_width(40, 40), 2);
  EXPECT_EQ(quad.segments_touching(Box(17, 17, 19, 19)), (std::set<int>{0}));
  EXPECT_EQ(eligible_region(quad, Box(17, 17, 19, 19), def), (std::vector<int>{0, 1, 2, 3}));
  // Far from the tile edges the ring stays inside tile 0.
  EXPECT_EQ(eligible_region(quad, Box(5, 5, 8, 8), def), (std::vector<int>{0}));

  ImageBuffer dark = solid(40, 40, 0.5f);
  paint(dark, 0, 0, 20, 20, 0.0f);
  const SegmentMap dseg = filter_segments(grid_segments(dark, 2, 2), 0.0, 5.0);
  EXPECT_THROW(eligible_region(dseg, Box(5, 5, 8, 8), def), NoEligibleRegionError);
}

TEST(SearchConfig, RingWidth) {
  SearchConfig c;
  EXPECT_EQ(c.ring_width(640, 640), 13);  // round(12.8)
  EXPECT_EQ(c.ring_width(640, 100), 2);
  EXPECT_EQ(c.ring_width(500, 300), 6);
  c.tau = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

// Blob inside a single tile of a 4x4 grid.
ImageBuffer blob_scene() {
  ImageBuffer img = solid(64, 64, 0.9f);
  paint(img, 20, 20, 28, 28, 0.3f);
  return img;
}

TEST(GreedyDeletion, SingleSegmentBlobFlipsInOneStep) {
  const ImageBuffer img = blob_scene();
  const SegmentMap seg = grid_segments(img, 4, 4);
  ToyDetector det(permissive_config());
  const auto dets = det.detect_one(img);
  ASSERT_EQ(dets.size(), 1u);
  const PerturbationOp op = make_op(PerturbationKind::kMaskBlack);
  const SearchConfig cfg;

  // Exhaustive oracle over single segments of the region.
  const auto region = eligible_region(seg, dets[0].box, cfg);
  int oracle = -1;
  double best = 2.0;
  for (int id : region) {
    const double c = matched_confidence(dets[0], det.detect_one(apply_perturbation(img, std::span(&id, 1), seg, op)), cfg.delta);
    if (c < best) best = c, oracle = id;
  }
  ASSERT_EQ(best, 0.0);

  const auto res = greedy_deletion(det, img, dets[0], op, seg, cfg);
  EXPECT_EQ(res.selected_segments, (std::vector<int>{oracle}));
  EXPECT_EQ(res.iterations, 1);
  EXPECT_TRUE(res.flipped);
  EXPECT_TRUE(res.zero_suppressed);
  EXPECT_EQ(res.stop_reason, "flipped");
  EXPECT_EQ(oracle, 5);
}

TEST(GreedyDeletion, AlreadyBelowTauIsVacuous) {
  ImageBuffer img = solid(64, 64, 0.9f);
  paint(img, 20, 20, 28, 28, 0.75f);  // contrast 0.15 -> score 0.375
  const SegmentMap seg = grid_segments(img, 4, 4);
  ToyDetector det(permissive_config());
  const auto dets = det.detect_one(img);
  ASSERT_EQ(dets.size(), 1u);
  const auto res = greedy_deletion(det, img, dets[0], make_op(PerturbationKind::kMaskMean), seg, {});
  EXPECT_TRUE(res.selected_segments.empty());
  EXPECT_EQ(res.iterations, 0);
  EXPECT_TRUE(res.flipped);
  EXPECT_FALSE(res.zero_suppressed);
  EXPECT_EQ(res.area_fraction, 0.0);
  EXPECT_EQ(res.stop_reason, "already_below_tau");
}

TEST(GreedyDeletion, BlurCannotEraseALargeHighContrastBlob) {
  ImageBuffer img = solid(96, 96, 0.9f);
  paint(img, 24, 24, 72, 72, 0.1f);
  const SegmentMap seg = grid_segments(img, 4, 4);
  ToyDetector det(permissive_config());
  const auto dets = det.detect_one(img);
  ASSERT_EQ(dets.size(), 1u);
  const auto res = greedy_deletion(det, img, dets[0], make_op(PerturbationKind::kBlur), seg, {});
  EXPECT_FALSE(res.flipped);
  EXPECT_GE(res.final_confidence, 0.5);
  EXPECT_EQ(res.final_confidence, res.confidence_trace.back());
  EXPECT_TRUE(res.stop_reason == "region_exhausted" || res.stop_reason == "max_iterations");

  SearchConfig capped;
  capped.max_iterations = 3;
  const auto short_res = greedy_deletion(det, img, dets[0], make_op(PerturbationKind::kBlur), seg, capped);
  EXPECT_EQ(short_res.iterations, 3);
  EXPECT_EQ(short_res.stop_reason, "max_iterations");
}

// Replays every iteration: the chosen segment's confidence is no worse than
// any other candidate that would add pixels, and the area trace is the exact
// dilated union.
TEST(GreedyDeletion, OneStepOptimalityAndAreaTraceProperty) {
  Rng rng(31);
  int searched = 0;
  for (int trial = 0; trial < 40; ++trial) {
    ImageBuffer img = solid(48, 48, static_cast<float>(rng.uniform(0.75, 0.95)));
    const int blobs = rng.uniform_int(1, 3);
    for (int b = 0; b < blobs; ++b) {
      const int r = rng.uniform_int(2, 34), c = rng.uniform_int(2, 34);
      paint(img, r, c, r + rng.uniform_int(5, 12), c + rng.uniform_int(5, 12),
            static_cast<float>(rng.uniform(0.1, 0.5)));
    }
    const SegmentMap seg = grid_segments(img, rng.uniform_int(2, 6), rng.uniform_int(2, 6));
    ToyDetector det(permissive_config());
    const auto dets = det.detect_one(img);
    if (dets.empty()) continue;
    const Detection target = dets[rng.uniform_int(0, static_cast<int>(dets.size()) - 1)];
    const auto kind = static_cast<PerturbationKind>(rng.uniform_int(0, 3));
    PerturbationOp op = make_op(kind);
    op.noise_seed = rng.next();
    op.mask_dilation_px = rng.uniform_int(0, 3);
    SearchConfig cfg;
    cfg.tau = rng.uniform(0.3, 0.9);

    PerturbationResult res;
    try {
      res = greedy_deletion(det, img, target, op, seg, cfg);
    } catch (const NoEligibleRegionError&) {
      continue;
    }
    ++searched;
    ASSERT_EQ(res.flipped, res.final_confidence < cfg.tau);
    ASSERT_EQ(res.zero_suppressed, res.final_confidence == 0.0);
    ASSERT_EQ(res.confidence_trace.size(), res.selected_segments.size());
    ASSERT_EQ(res.area_trace.size(), res.selected_segments.size());
    ASSERT_EQ(res.iterations, static_cast<int>(res.selected_segments.size()));

    std::vector<int> chosen;
    double previous_area = 0.0;
    for (std::size_t t = 0; t < res.selected_segments.size(); ++t) {
      const auto base = perturbation_mask(seg, chosen, op.mask_dilation_px);
      for (int cand : res.region) {
        if (std::find(chosen.begin(), chosen.end(), cand) != chosen.end()) continue;
        std::vector<int> with = chosen;
        with.push_back(cand);
        if (mask_count(perturbation_mask(seg, with, op.mask_dilation_px)) == mask_count(base)) continue;
        const double c = matched_confidence(target, det.detect_one(apply_perturbation(img, with, seg, op)), cfg.delta);
        ASSERT_LE(res.confidence_trace[t], c) << "trial " << trial << " iteration " << t;
      }
      chosen.push_back(res.selected_segments[t]);
      const double area = static_cast<double>(mask_count(perturbation_mask(seg, chosen, op.mask_dilation_px))) /
                          (48.0 * 48.0);
      ASSERT_EQ(res.area_trace[t], area);
      ASSERT_GT(area, previous_area);
      previous_area = area;
      ASSERT_TRUE(std::binary_search(res.region.begin(), res.region.end(), res.selected_segments[t]));
    }
    ASSERT_EQ(res.area_fraction, previous_area);
    // Deterministic rerun.
    const auto again = greedy_deletion(det, img, target, op, seg, cfg);
    ASSERT_EQ(perturbation_result_to_json(again), perturbation_result_to_json(res));
  }
  EXPECT_GE(searched, 20);
}

TEST(GreedyDeletion, DetectorFailureKeepsPartialTrace) {
  const ImageBuffer img = blob_scene();
  const SegmentMap seg = grid_segments(img, 4, 4);
  int calls = 0;
  FunctionDetector det(
      [&](const ImageBuffer& im) {
        if (++calls > 1) throw AdapterError("backend went away");
        return toy_detect(im, {});
      },
      permissive_config());
  const Detection target = toy_detect(img, {})[0];
  try {
    greedy_deletion(det, img, target, make_op(PerturbationKind::kMaskMean), seg, {});
    FAIL() << "expected DeletionAborted";
  } catch (const DeletionAborted& e) {
    EXPECT_EQ(e.partial().stop_reason, "aborted");
    EXPECT_GT(e.partial().original_confidence, 0.5);
  }
}

TEST(PerturbationJson, RoundTrip) {
  const ImageBuffer img = blob_scene();
  const SegmentMap seg = grid_segments(img, 4, 4);
  ToyDetector det(permissive_config());
  const auto res = greedy_deletion(det, img, det.detect_one(img)[0], make_op(PerturbationKind::kNoise), seg, {});
  const auto back = perturbation_result_from_json(perturbation_result_to_json(res));
  EXPECT_EQ(perturbation_result_to_json(back), perturbation_result_to_json(res));
  EXPECT_EQ(back.selected_segments, res.selected_segments);
  EXPECT_EQ(perturbation_kind_from_string("mask_black"), PerturbationKind::kMaskBlack);
  EXPECT_THROW(perturbation_kind_from_string("erase"), InvalidArgument);
}

}  // namespace
}  // namespace detxai
