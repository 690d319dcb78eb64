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
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "detxai/errors.hpp"
#include "detxai/metrics.hpp"
#include "detxai/random.hpp"

namespace detxai {
namespace {

AttributionMap map_from(int h, int w, const std::vector<double>& v) {
  RawMap raw(h, w);
  for (std::size_t i = 0; i < v.size(); ++i) raw[i] = v[i];
  return AttributionMap::from_normalized(raw);
}

FaithfulnessRecord rec(double s, double sp, PerturbationKind op = PerturbationKind::kMaskMean) {
  FaithfulnessRecord r;
  r.image_id = "img";
  r.op = op;
  r.original_confidence = s;
  r.perturbed_confidence = sp;
  return r;
}

TEST(AttributionRatio, Examples) {
  const std::vector<AnnotationBox> quarter{{Box(0, 0, 10, 10), 0}};
  EXPECT_NEAR(*attribution_ratio(map_from(20, 20, std::vector<double>(400, 1.0)), quarter, 0.5), 0.25, 1e-12);

  std::vector<double> inside(400, 0.0);
  for (int r = 2; r < 8; ++r) {
    for (int c = 2; c < 8; ++c) inside[r * 20 + c] = 0.9;
  }
  EXPECT_EQ(*attribution_ratio(map_from(20, 20, inside), quarter, 0.5), 1.0);
  EXPECT_FALSE(attribution_ratio(map_from(20, 20, std::vector<double>(400, 0.2)), quarter, 0.5));
  EXPECT_THROW(attribution_ratio(map_from(2, 2, {0, 0, 0, 1}), {}, 0.5), InvalidArgument);

  // Overlapping boxes do not double count.
  const std::vector<AnnotationBox> overlap{{Box(0, 0, 10, 10), 0}, {Box(5, 5, 15, 15), 0}};
  EXPECT_NEAR(*attribution_ratio(map_from(20, 20, std::vector<double>(400, 1.0)), overlap, 0.5),
              175.0 / 400.0, 1e-12);
}

// Gaussian bump with its peak on a pixel center; the theta level set is the
// set of pixel centers within radius s * sqrt(-2 ln theta).
TEST(AttributionRatio, GaussianBumpMatchesDiskCount) {
  const int h = 64, w = 80;
  const double cx = 30.5, cy = 25.5;
  for (double s : {3.0, 6.5, 11.0}) {
    for (double theta : {0.3, 0.5, 0.8}) {
      std::vector<double> v(h * w);
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          const double d2 = (c + 0.5 - cx) * (c + 0.5 - cx) + (r + 0.5 - cy) * (r + 0.5 - cy);
          v[r * w + c] = std::exp(-d2 / (2 * s * s));
        }
      }
      const Box box(28, 20, 50, 40);
      const double r2 = -2 * s * s * std::log(theta);
      int in_disk = 0, in_both = 0;
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          const double d2 = (c + 0.5 - cx) * (c + 0.5 - cx) + (r + 0.5 - cy) * (r + 0.5 - cy);
          ASSERT_GT(std::abs(d2 - r2), 1e-6);  // no pixel sits on the level curve
          if (d2 > r2) continue;
          ++in_disk;
          if (c >= 28 && c < 50 && r >= 20 && r < 40) ++in_both;
        }
      }
      const std::vector<AnnotationBox> gt{{box, 0}};
      EXPECT_NEAR(*attribution_ratio(map_from(h, w, v), gt, theta),
                  static_cast<double>(in_both) / in_disk, 1e-12)
          << "s=" << s << " theta=" << theta;
    }
  }
}

TEST(AttributionRatio, SquaringPreservesTheLevelSet) {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const int h = rng.uniform_int(2, 20), w = rng.uniform_int(2, 20);
    std::vector<double> v(h * w), sq(h * w);
    for (int i = 0; i < h * w; ++i) {
      v[i] = rng.uniform_int(0, 1024) / 1024.0;
      sq[i] = v[i] * v[i];
    }
    const double theta = (rng.uniform_int(1, 1022) + 0.5) / 1024.0;
    std::vector<AnnotationBox> gt;
    for (int b = rng.uniform_int(1, 3); b > 0; --b) {
      const double x = rng.uniform(0, w - 1), y = rng.uniform(0, h - 1);
      gt.push_back({Box(x, y, x + rng.uniform(0.5, w), y + rng.uniform(0.5, h)), 0});
    }
    for (int i = 0; i < h * w; ++i) ASSERT_EQ(v[i] >= theta, sq[i] >= theta * theta);
    const auto a = attribution_ratio(map_from(h, w, v), gt, theta);
    const auto b = attribution_ratio(map_from(h, w, sq), gt, theta * theta);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) {
      EXPECT_EQ(*a, *b);
      EXPECT_GE(*a, 0.0);
      EXPECT_LE(*a, 1.0);
    }
  }
}

TEST(MaxSaliencyHit, ExamplesAndTies) {
  const std::vector<AnnotationBox> gt{{Box(4, 4, 8, 8), 0}};
  std::vector<double> v(100, 0.0);
  v[5 * 10 + 5] = 1.0;
  EXPECT_TRUE(max_saliency_hit(map_from(10, 10, v), gt));
  v[5 * 10 + 5] = 0.0;
  v[0] = 1.0;
  EXPECT_FALSE(max_saliency_hit(map_from(10, 10, v), gt));
  // Tie: the row-major first maximum decides.
  v[5 * 10 + 5] = 1.0;
  EXPECT_FALSE(max_saliency_hit(map_from(10, 10, v), gt));
  v[0] = 0.0;
  v[9 * 10 + 9] = 1.0;
  EXPECT_TRUE(max_saliency_hit(map_from(10, 10, v), gt));
  EXPECT_THROW(max_saliency_hit(map_from(10, 10, v), {}), InvalidArgument);
}

TEST(FlipRate, Examples) {
  const std::vector<FaithfulnessRecord> r{rec(0.9, 0.1), rec(0.9, 0.6), rec(0.9, 0.4)};
  EXPECT_NEAR(flip_rate(r, 0.5), 2.0 / 3.0, 1e-12);
  const std::vector<FaithfulnessRecord> zeros{rec(0.9, 0.0), rec(0.7, 0.0)};
  EXPECT_EQ(flip_rate(zeros, 0.5), 1.0);
  const std::vector<FaithfulnessRecord> same{rec(0.9, 0.9), rec(0.7, 0.7)};
  EXPECT_EQ(flip_rate(same, 0.5), 0.0);
  EXPECT_THROW(flip_rate({}, 0.5), InvalidArgument);
}

TEST(ConfidenceDrop, Examples) {
  const std::vector<FaithfulnessRecord> r{rec(1.0, 0.0), rec(0.8, 0.6)};
  const auto d = confidence_drop(r, 0.5);
  EXPECT_NEAR(d.mean_drop, 0.6, 1e-12);
  ASSERT_TRUE(d.unflipped_drop);
  EXPECT_NEAR(*d.unflipped_drop, 0.2, 1e-12);
  EXPECT_EQ(d.n_unflipped, 1u);
  const std::vector<FaithfulnessRecord> same{rec(0.9, 0.9), rec(0.7, 0.7)};
  EXPECT_EQ(confidence_drop(same, 0.5).mean_drop, 0.0);
  const std::vector<FaithfulnessRecord> flipped{rec(0.9, 0.1), rec(0.7, 0.0)};
  EXPECT_FALSE(confidence_drop(flipped, 0.5).unflipped_drop);
  EXPECT_THROW(confidence_drop({}, 0.5), InvalidArgument);
}

TEST(Faithfulness, AgreesWithBruteForceRecount) {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<FaithfulnessRecord> r;
    for (int i = rng.uniform_int(1, 30); i > 0; --i) {
      const double s = rng.uniform(0.5, 1.0);
      // Land exactly on tau now and then.
      const double sp = rng.bernoulli(0.1) ? 0.5 : rng.bernoulli(0.2) ? 0.0 : rng.uniform(0.0, s);
      r.push_back(rec(s, sp));
    }
    int flipped = 0, kept = 0;
    double all = 0.0, unflipped = 0.0;
    for (const auto& x : r) {
      const double drop = x.original_confidence - x.perturbed_confidence;
      all += drop;
      if (x.perturbed_confidence < 0.5) {
        ++flipped;
      } else {
        ++kept;
        unflipped += drop;
      }
    }
    ASSERT_EQ(flip_rate(r, 0.5), static_cast<double>(flipped) / r.size());
    const auto d = confidence_drop(r, 0.5);
    ASSERT_NEAR(d.mean_drop, all / r.size(), 1e-12);
    ASSERT_EQ(d.n_unflipped, static_cast<std::size_t>(kept));
    ASSERT_EQ(d.unflipped_drop.has_value(), kept > 0);
    if (kept > 0) ASSERT_NEAR(*d.unflipped_drop, unflipped / kept, 1e-12);
  }
}

TEST(Summarize, MeanAndSampleSd) {
  EXPECT_FALSE(summarize({}));
  const std::vector<double> one{0.42};
  const auto s1 = *summarize(one);
  EXPECT_EQ(s1.mean, 0.42);
  EXPECT_EQ(s1.sd, 0.0);
  EXPECT_TRUE(s1.single_sample);
  const std::vector<double> two{0.2, 0.6};
  const auto s2 = *summarize(two);
  EXPECT_NEAR(s2.mean, 0.4, 1e-12);
  EXPECT_NEAR(s2.sd, std::sqrt(0.08), 1e-12);
  EXPECT_FALSE(s2.single_sample);
}

TEST(Report, AggregatesCountsAndEchoesConfig) {
  std::vector<FidelityRecord> fid{
      {"a", "layercam", 0.8, true, 1, 2},
      {"b", "layercam", std::nullopt, false, 0, 1},
      {"c", "layercam", 0.4, true, 2, 2},
      {"a", "lime", 0.5, std::nullopt, 0, 0},
  };
  std::vector<FaithfulnessRecord> faith{rec(1.0, 0.0, PerturbationKind::kMaskBlack),
                                        rec(0.8, 0.6, PerturbationKind::kMaskBlack),
                                        rec(0.9, 0.9, PerturbationKind::kBlur)};
  faith[0].area_fraction = 0.1;
  faith[0].segment_count = 3;
  FaithfulnessRecord failed = rec(0.9, 0.0, PerturbationKind::kBlur);
  failed.completed = false;
  faith.push_back(failed);
  nlohmann::json config = {{"perturbation", {{"tau", 0.5}, {"blur_sigma", 5.0}}}, {"metrics", {{"theta", 0.5}}}};

  const MetricsReport rep = aggregate_report(fid, faith, 0.5, 0.5, config);
  const auto& lc = rep.fidelity.at("layercam");
  EXPECT_EQ(lc.images, 3u);
  EXPECT_EQ(lc.ratio_missing, 1u);
  EXPECT_NEAR(lc.attribution_ratio->mean, 0.6, 1e-12);
  EXPECT_EQ(lc.image_hits, 2u);
  EXPECT_EQ(lc.images_scored, 3u);
  EXPECT_EQ(lc.box_hits, 3u);
  EXPECT_EQ(lc.boxes, 5u);
  EXPECT_TRUE(rep.fidelity.at("lime").attribution_ratio->single_sample);

  const auto& black = rep.faithfulness.at("mask_black");
  EXPECT_EQ(black.attempted, 2u);
  EXPECT_EQ(black.flip_rate, 0.5);
  EXPECT_NEAR(black.drop.mean_drop, 0.6, 1e-12);
  EXPECT_EQ(black.zero_suppressed, 1u);
  EXPECT_EQ(black.area_fraction_flipped->mean, 0.1);
  EXPECT_EQ(black.segments_flipped->mean, 3.0);
  const auto& blur = rep.faithfulness.at("blur");
  EXPECT_EQ(blur.attempted, 2u);
  EXPECT_EQ(blur.completed, 1u);
  EXPECT_EQ(blur.flip_rate, 0.0);

  const auto j = rep.to_json();
  EXPECT_EQ(j.at("config"), config);
  EXPECT_EQ(j.at("tau"), 0.5);
  EXPECT_EQ(j.at("theta"), 0.5);
  EXPECT_TRUE(j.at("faithfulness").at("mask_black").at("CD_flip").is_number());
  EXPECT_TRUE(j.at("faithfulness").at("blur").at("CD_flip").is_number());
  EXPECT_TRUE(validate_metrics_json(j).empty());
  // Parsing from text gives unsigned and integer types; still valid.
  EXPECT_TRUE(validate_metrics_json(nlohmann::json::parse(j.dump())).empty());

  auto broken = j;
  broken["faithfulness"]["mask_black"]["FR"] = 1.5;
  EXPECT_FALSE(validate_metrics_json(broken).empty());
  broken = j;
  broken.erase("tau");
  EXPECT_FALSE(validate_metrics_json(broken).empty());

  const std::string csv = per_image_csv(fid, faith, 0.5);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4 + 4);
  EXPECT_NE(csv.find("a,fidelity,layercam,,0.800000,1,1,2,,,,,"), std::string::npos);
}

}  // namespace
}  // namespace detxai
