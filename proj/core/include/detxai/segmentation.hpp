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
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <vector>

#include <nlohmann/json.hpp>

#include "detxai/geometry.hpp"
#include "detxai/image.hpp"

namespace detxai {

using Lab = std::array<double, 3>;
using LabImage = Grid<Lab>;

// sRGB (D65) to CIELAB. L in [0,100].
Lab srgb_to_lab(double r, double g, double b);
LabImage to_lab(const ImageBuffer& image);

struct SlicParams {
  int n_segments = 200;
  double compactness = 20.0;
  double smoothing_sigma = 2.0;
  int max_iterations = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SegmentInfo {
  int area = 0;
  Lab mean_lab{0.0, 0.0, 0.0};
  double centroid_x = 0.0;  // pixel-center coordinates
  double centroid_y = 0.0;
  bool eligible = true;
};

// Per-pixel superpixel labels 0..n-1 with per-segment statistics.
class SegmentMap {
 public:
  SegmentMap() = default;
  // Labels must be contiguous 0..n-1; statistics come from `lab`. All
  // segments start eligible.
  SegmentMap(Grid<int> labels, const LabImage& lab);

  int height() const { return labels_.height(); }
  int width() const { return labels_.width(); }
  int segment_count() const { return static_cast<int>(segments_.size()); }
  int label(int row, int col) const { return labels_.at(row, col); }
  const Grid<int>& labels() const { return labels_; }
  const SegmentInfo& segment(int id) const { return segments_.at(static_cast<std::size_t>(id)); }
  const std::vector<SegmentInfo>& segments() const { return segments_; }

  bool eligible(int id) const { return segment(id).eligible; }
  void set_eligible(int id, bool value) { segments_.at(static_cast<std::size_t>(id)).eligible = value; }
  std::vector<int> eligible_ids() const;

  // Flat pixel indices (row * width + col) of a segment, in row-major order.
  const std::vector<std::size_t>& pixels(int id) const {
    return pixels_.at(static_cast<std::size_t>(id));
  }

  // Segments with at least one pixel covered by the box.
  std::set<int> segments_touching(const Box& box) const;

  friend bool operator==(const SegmentMap& a, const SegmentMap& b);

 private:
  friend SegmentMap load_segment_map(const std::filesystem::path&, const std::filesystem::path&);
  void index_pixels();

  Grid<int> labels_;
  std::vector<SegmentInfo> segments_;
  std::vector<std::vector<std::size_t>> pixels_;
};

// SLIC superpixels over (L, a, b, x*m/S, y*m/S) with m = compactness and
// S = sqrt(H*W / n_segments). Orphan fragments are merged into the largest
// adjacent segment. Deterministic.
SegmentMap slic(const LabImage& lab, const SlicParams& params);

// Marks segments smaller than min_area_fraction * H * W or with mean L below
// black_lightness_threshold as ineligible. Labels are unchanged.
SegmentMap filter_segments(SegmentMap segmap, double min_area_fraction,
                           double black_lightness_threshold);

// 16-bit label PNG plus JSON sidecar with per-segment statistics.
nlohmann::json segment_map_sidecar(const SegmentMap& segmap);
void save_segment_map(const SegmentMap& segmap, const std::filesystem::path& png_path,
                      const std::filesystem::path& json_path);
SegmentMap load_segment_map(const std::filesystem::path& png_path,
                            const std::filesystem::path& json_path);

}  // namespace detxai
