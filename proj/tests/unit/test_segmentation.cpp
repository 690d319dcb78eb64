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
#include <queue>
#include <set>
#include <utility>
#include <vector>

#include <gtest/gtest.h>

#include "detxai/errors.hpp"
#include "detxai/random.hpp"
#include "detxai/segmentation.hpp"
#include "fixtures.hpp"

namespace detxai {
namespace {

using testing::grid_segments;
using testing::paint;
using testing::solid;

ImageBuffer random_scene(Rng& rng, int h, int w) {
  ImageBuffer img = solid(h, w, static_cast<float>(rng.uniform(0.2, 0.9)));
  const int rects = rng.uniform_int(1, 6);
  for (int i = 0; i < rects; ++i) {
    const int r0 = rng.uniform_int(0, h - 2);
    const int c0 = rng.uniform_int(0, w - 2);
    paint(img, r0, c0, rng.uniform_int(r0 + 1, h), rng.uniform_int(c0 + 1, w),
          static_cast<float>(rng.uniform()));
  }
  for (auto& v : img.values()) v = std::clamp(v + static_cast<float>(rng.uniform(-0.03, 0.03)), 0.f, 1.f);
  return img;
}

// 4-connected component count of one label, by flood fill.
int components_of(const SegmentMap& s, int id) {
  std::vector<char> seen(static_cast<std::size_t>(s.height()) * s.width(), 0);
  int count = 0;
  for (int r = 0; r < s.height(); ++r) {
    for (int c = 0; c < s.width(); ++c) {
      if (s.label(r, c) != id || seen[r * s.width() + c]) continue;
      ++count;
      std::queue<std::pair<int, int>> q;
      q.push({r, c});
      seen[r * s.width() + c] = 1;
      while (!q.empty()) {
        auto [y, x] = q.front();
        q.pop();
        const int dy[] = {1, -1, 0, 0}, dx[] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int ny = y + dy[k], nx = x + dx[k];
          if (ny < 0 || nx < 0 || ny >= s.height() || nx >= s.width()) continue;
          if (s.label(ny, nx) != id || seen[ny * s.width() + nx]) continue;
          seen[ny * s.width() + nx] = 1;
          q.push({ny, nx});
        }
      }
    }
  }
  return count;
}

TEST(Lab, ReferenceColors) {
  const Lab black = srgb_to_lab(0, 0, 0);
  EXPECT_NEAR(black[0], 0.0, 1e-9);
  const Lab white = srgb_to_lab(1, 1, 1);
  EXPECT_NEAR(white[0], 100.0, 1e-3);
  EXPECT_NEAR(white[1], 0.0, 1e-3);
  EXPECT_NEAR(white[2], 0.0, 1e-3);
  EXPECT_NEAR(srgb_to_lab(0.5, 0.5, 0.5)[0], 53.389, 0.01);
  const Lab red = srgb_to_lab(1, 0, 0);
  EXPECT_NEAR(red[0], 53.24, 0.05);
  EXPECT_NEAR(red[1], 80.09, 0.05);
  EXPECT_NEAR(red[2], 67.20, 0.05);
}

TEST(Slic, UniformImageGivesGridTiles) {
  SlicParams p;
  p.n_segments = 4;
  const SegmentMap s = slic(to_lab(solid(40, 40, 0.5f)), p);
  ASSERT_EQ(s.segment_count(), 4);
  // Pixels equidistant from two centers go to one of them, so tiles are
  // within one row or column of a 20x20 quadrant.
  std::set<std::pair<int, int>> quadrants;
  for (int id = 0; id < 4; ++id) {
    const auto& seg = s.segment(id);
    EXPECT_GE(seg.area, 19 * 19);
    EXPECT_LE(seg.area, 21 * 21);
    const int qx = seg.centroid_x < 20 ? 0 : 1, qy = seg.centroid_y < 20 ? 0 : 1;
    EXPECT_NEAR(seg.centroid_x, 10 + 20 * qx, 1.0);
    EXPECT_NEAR(seg.centroid_y, 10 + 20 * qy, 1.0);
    quadrants.insert({qx, qy});
  }
  EXPECT_EQ(quadrants.size(), 4u);
}

TEST(Slic, HalvesSplitAtTheColorEdge) {
  ImageBuffer img = solid(16, 16, 0.0f);
  paint(img, 0, 8, 16, 16, 1.0f);
  const LabImage lab = to_lab(img);

  int oracle = -1;
  double best = 1e300;
  for (int split = 1; split < 16; ++split) {
    double cost = 0.0;
    for (int side = 0; side < 2; ++side) {
      const int lo = side == 0 ? 0 : split, hi = side == 0 ? split : 16;
      double mean = 0.0;
      for (int c = lo; c < hi; ++c) mean += lab.at(0, c)[0];
      mean /= hi - lo;
      for (int c = lo; c < hi; ++c) cost += (lab.at(0, c)[0] - mean) * (lab.at(0, c)[0] - mean);
    }
    if (cost < best) best = cost, oracle = split;
  }
  ASSERT_EQ(oracle, 8);

  SlicParams p;
  p.n_segments = 2;
  p.compactness = 1.0;
  p.smoothing_sigma = 0.0;
  const SegmentMap s = slic(lab, p);
  ASSERT_EQ(s.segment_count(), 2);
  for (int r = 0; r < 16; ++r) {
    int changes = 0;
    for (int c = 1; c < 16; ++c) {
      if (s.label(r, c) != s.label(r, c - 1)) {
        ++changes;
        EXPECT_LE(std::abs(c - oracle), 1) << "row " << r;
      }
    }
    EXPECT_EQ(changes, 1) << "row " << r;
  }
}

TEST(Slic, DeterministicPartitionProperty) {
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const int h = rng.uniform_int(12, 60), w = rng.uniform_int(12, 60);
    const ImageBuffer img = random_scene(rng, h, w);
    SlicParams p;
    p.n_segments = rng.uniform_int(2, 40);
    p.compactness = rng.uniform(1.0, 40.0);
    p.smoothing_sigma = rng.uniform(0.0, 3.0);
    const SegmentMap a = slic(to_lab(img), p);
    const SegmentMap b = slic(to_lab(img), p);
    ASSERT_TRUE(a == b);
    ASSERT_TRUE(a.labels() == b.labels());

    std::vector<int> counted(a.segment_count(), 0);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        ASSERT_GE(a.label(r, c), 0);
        ASSERT_LT(a.label(r, c), a.segment_count());
        ++counted[a.label(r, c)];
      }
    }
    int total = 0;
    for (int id = 0; id < a.segment_count(); ++id) {
      EXPECT_GT(counted[id], 0);
      EXPECT_EQ(counted[id], a.segment(id).area);
      EXPECT_EQ(a.pixels(id).size(), static_cast<std::size_t>(counted[id]));
      EXPECT_EQ(components_of(a, id), 1) << "trial " << trial << " segment " << id;
      total += counted[id];
    }
    EXPECT_EQ(total, h * w);
  }
}

TEST(Slic, RejectsBadParams) {
  SlicParams p;
  p.n_segments = 1;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = {};
  p.compactness = 0.0;
  EXPECT_THROW(slic(to_lab(solid(8, 8, 0.5f)), p), InvalidArgument);
  p = {};
  p.smoothing_sigma = -1.0;
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(FilterSegments, SmallAndBlackSegmentsBecomeIneligible) {
  // One pixel in a 640x640 image: 1 < 5e-4 * 640 * 640 = 204.8.
  ImageBuffer big = solid(640, 640, 0.5f);
  Grid<int> labels(640, 640, 0);
  labels.at(100, 100) = 1;
  SegmentMap s(std::move(labels), to_lab(big));
  s = filter_segments(std::move(s), 5e-4, 5.0);
  EXPECT_TRUE(s.eligible(0));
  EXPECT_FALSE(s.eligible(1));

  ImageBuffer img = solid(20, 20, 0.5f);
  paint(img, 0, 0, 10, 10, 0.0f);
  SegmentMap g = grid_segments(img, 2, 2);
  const Grid<int> before = g.labels();
  g = filter_segments(std::move(g), 5e-4, 5.0);
  EXPECT_FALSE(g.eligible(0));  // pure black, L = 0
  EXPECT_TRUE(g.eligible(1));
  EXPECT_TRUE(g.eligible(3));
  EXPECT_TRUE(g.labels() == before);
  EXPECT_EQ(g.eligible_ids(), (std::vector<int>{1, 2, 3}));
}

TEST(FilterSegments, LabelsNeverChangeProperty) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const ImageBuffer img = random_scene(rng, 32, 32);
    SlicParams p;
    p.n_segments = rng.uniform_int(4, 30);
    const SegmentMap s = slic(to_lab(img), p);
    const double frac = rng.uniform(0.0, 0.05), black = rng.uniform(0.0, 60.0);
    const SegmentMap f = filter_segments(s, frac, black);
    EXPECT_TRUE(f.labels() == s.labels());
    for (int id = 0; id < f.segment_count(); ++id) {
      const auto& seg = f.segment(id);
      const bool expected = seg.area >= frac * 32 * 32 && seg.mean_lab[0] >= black;
      EXPECT_EQ(f.eligible(id), expected);
    }
  }
}

TEST(SegmentMapIo, SaveLoadRoundTrip) {
  testing::TempDir dir("seg");
  Rng rng(2);
  const ImageBuffer img = random_scene(rng, 30, 44);
  SlicParams p;
  p.n_segments = 12;
  const SegmentMap s = filter_segments(slic(to_lab(img), p), 0.01, 30.0);
  save_segment_map(s, dir / "s.png", dir / "s.json");
  const SegmentMap back = load_segment_map(dir / "s.png", dir / "s.json");
  EXPECT_TRUE(back == s);
  EXPECT_EQ(back.eligible_ids(), s.eligible_ids());
  EXPECT_THROW(load_segment_map(dir / "missing.png", dir / "s.json"), IoError);
}

TEST(SegmentMap, SegmentsTouchingUsesPixelCenters) {
  const SegmentMap g = grid_segments(solid(20, 20, 0.5f), 2, 2);
  EXPECT_EQ(g.segments_touching(Box(2, 2, 8, 8)), (std::set<int>{0}));
  EXPECT_EQ(g.segments_touching(Box(5, 5, 15, 8)), (std::set<int>{0, 1}));
  EXPECT_EQ(g.segments_touching(Box(9, 9, 11, 11)), (std::set<int>{0, 1, 2, 3}));
  // Covers no pixel center past column 10.
  EXPECT_EQ(g.segments_touching(Box(2, 2, 10.4, 8)), (std::set<int>{0}));
}

}  // namespace
}  // namespace detxai
