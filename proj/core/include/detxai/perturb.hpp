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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "detxai/detector.hpp"
#include "detxai/segmentation.hpp"

namespace detxai {

enum class PerturbationKind { kMaskMean, kMaskBlack, kNoise, kBlur };
std::string to_string(PerturbationKind k);
PerturbationKind perturbation_kind_from_string(std::string_view s);

struct PerturbationOp {
  PerturbationKind kind = PerturbationKind::kMaskMean;
  double blur_sigma = 5.0;
  double noise_level = 0.6;  // pixel = (1 - level) * original + level * U(0,1)
  int mask_dilation_px = 2;
  std::uint64_t noise_seed = 0;

  void validate() const;
};

struct SearchConfig {
  double tau = 0.5;
  double delta = 0.2;
  int max_iterations = 80;
  double ring_fraction = 0.02;
  int min_ring_px = 2;
  int min_region_segments = 3;

  void validate() const;
  // max(min_ring_px, round(ring_fraction * min(H, W)))
  int ring_width(int image_height, int image_width) const;
};

// Eligible segments touching the box; when fewer than min_region_segments,
// eligible segments touching the surrounding ring are added. Sorted ids.
// Throws NoEligibleRegionError when the result is empty.
std::vector<int> eligible_region(const SegmentMap& segmap, const Box& target_box,
                                 const SearchConfig& config);

// Union of the segments' pixels, dilated by `dilation_px` (square element).
Grid<std::uint8_t> perturbation_mask(const SegmentMap& segmap, std::span<const int> segments,
                                     int dilation_px);

// The image with the operator applied everywhere; masks composite from it.
class PreparedPerturbation {
 public:
  PreparedPerturbation(const ImageBuffer& image, const PerturbationOp& op);

  const ImageBuffer& original() const { return original_; }
  const ImageBuffer& replacement() const { return replacement_; }
  ImageBuffer apply(const Grid<std::uint8_t>& mask) const;
  ImageBuffer apply(std::span<const std::size_t> pixels) const;

 private:
  ImageBuffer original_;
  ImageBuffer replacement_;
};

ImageBuffer apply_perturbation(const ImageBuffer& image, std::span<const int> segments,
                               const SegmentMap& segmap, const PerturbationOp& op);

struct PerturbationResult {
  Detection target{Box(0, 0, 1, 1), 0, 0.0};
  PerturbationOp op;
  SearchConfig config;
  std::vector<int> region;
  double original_confidence = 0.0;
  std::vector<int> selected_segments;
  std::vector<double> confidence_trace;  // matched confidence after each iteration
  std::vector<double> area_trace;        // perturbed area fraction after each iteration
  double final_confidence = 0.0;
  bool flipped = false;          // final_confidence < tau
  bool zero_suppressed = false;  // final_confidence == 0
  double area_fraction = 0.0;
  int iterations = 0;
  std::string stop_reason;  // already_below_tau | flipped | max_iterations | region_exhausted
};

// Raised when the detector fails mid-search; carries the trace so far.
class DeletionAborted : public AdapterError {
 public:
  DeletionAborted(const std::string& what, PerturbationResult partial)
      : AdapterError(what), partial_(std::move(partial)) {}
  const PerturbationResult& partial() const { return partial_; }

 private:
  PerturbationResult partial_;
};

// Greedy forward selection: each iteration perturbs the region segment whose
// addition minimises the target's matched confidence (ties: smaller area,
// then lower id). Stops when the confidence drops below tau or after
// max_iterations. Candidates already covered by the dilated mask are skipped.
PerturbationResult greedy_deletion(Detector& detector, const ImageBuffer& image,
                                   const Detection& target, const PerturbationOp& op,
                                   const SegmentMap& segmap, const SearchConfig& config);

nlohmann::json perturbation_op_to_json(const PerturbationOp& op);
PerturbationOp perturbation_op_from_json(const nlohmann::json& j);
nlohmann::json search_config_to_json(const SearchConfig& c);
SearchConfig search_config_from_json(const nlohmann::json& j);
nlohmann::json perturbation_result_to_json(const PerturbationResult& r);
PerturbationResult perturbation_result_from_json(const nlohmann::json& j);

}  // namespace detxai
