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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "detxai/detector.hpp"
#include "detxai/segmentation.hpp"

namespace detxai {

enum class WeightMode { kConfidence, kArea, kUniform };
std::string to_string(WeightMode m);
WeightMode weight_mode_from_string(std::string_view s);

struct InstanceWeights {
  WeightMode mode = WeightMode::kConfidence;
  std::vector<double> weights;  // aligned with the reference DetectionSet
};

// confidence: c_i / sum c_j; area: a_i / sum a_j; uniform: 1 / M.
InstanceWeights instance_weights(const DetectionSet& detections, WeightMode mode);

// Binary keep/drop matrix over eligible segments. Row 0 keeps everything and
// every row keeps at least one segment.
class SampleMatrix {
 public:
  SampleMatrix(int columns, std::vector<std::uint8_t> rows_flat);

  int rows() const { return static_cast<int>(data_.size() / static_cast<std::size_t>(cols_)); }
  int cols() const { return cols_; }
  std::span<const std::uint8_t> row(int i) const {
    return std::span(data_).subspan(static_cast<std::size_t>(i) * cols_, cols_);
  }
  int kept(int i) const;

 private:
  int cols_;
  std::vector<std::uint8_t> data_;
};

struct LimeParams {
  int n_samples = 1000;
  double keep_probability = 0.5;
  std::optional<double> kernel_width;  // default 0.25 * sqrt(n_eligible)
  double ridge = 1e-3;
  std::optional<std::array<float, 3>> fill;  // default per-channel image mean
  double iou_match_threshold = 0.5;
  WeightMode weight_mode = WeightMode::kConfidence;
  double proximity_scale = 0.05;
  std::uint64_t seed = 0;

  void validate(int n_eligible) const;
  double effective_kernel_width(int n_eligible) const;
};

SampleMatrix generate_samples(int n_eligible, const LimeParams& params);

// Pixels of eligible segments whose column in `row` is 0 take `fill`.
// Column j corresponds to segmap.eligible_ids()[j].
ImageBuffer mask_sample(const ImageBuffer& image, const SegmentMap& segmap,
                        std::span<const std::uint8_t> row, std::array<float, 3> fill);

// sum_i w_i * s'_i, with s'_i the matched perturbed score (0 if unmatched).
double score_sample(const DetectionSet& reference, const DetectionSet& perturbed,
                    const InstanceWeights& weights, double iou_match_threshold);

struct Surrogate {
  double intercept = 0.0;
  std::vector<double> coefficients;  // one per eligible segment
  std::vector<int> segment_ids;      // eligible segment id of each coefficient
  std::vector<double> sample_weights;
  double kernel_width = 0.0;
  double ridge = 0.0;
  double r_squared = 0.0;
};

// Weighted ridge regression minimising
//   sum_j pi_j (f_j - b0 - z_j . b)^2 / sum_j pi_j + ridge * |b|^2
// with pi_j = exp(-d_j^2 / kernel_width^2) and d_j the cosine distance of
// row j from the all-ones row. The intercept is not penalised. Throws
// SingularSystemError when ridge == 0 and the design is rank deficient.
Surrogate fit_surrogate(const SampleMatrix& z, std::span<const double> responses,
                        double kernel_width, double ridge);

struct SegmentAttribution {
  int id = 0;
  std::optional<double> beta;  // absent for ineligible segments
  double proximity = 0.0;
  double final_value = 0.0;
};

struct ExplanationMap {
  AttributionMap map;
  std::vector<SegmentAttribution> segments;  // indexed by segment id
};

// Segment value max(beta, 0) * proximity, painted over the segment and
// min-max normalized. Proximity is 1 for segments touching a detection box,
// otherwise exp(-g^2 / (2 sigma^2)) with g the centroid distance to the
// nearest box and sigma = proximity_scale * image diagonal.
ExplanationMap build_explanation_map(const Surrogate& surrogate, const SegmentMap& segmap,
                                     const DetectionSet& detections, double proximity_scale);

struct LimeExplanation {
  DetectionSet reference;
  InstanceWeights weights;
  std::vector<double> responses;
  Surrogate surrogate;
  ExplanationMap explanation;
  LimeParams params;
};

// Full pipeline on one image: reference detection, sampling, scoring,
// surrogate fit and map construction.
LimeExplanation explain_lime(Detector& detector, const ImageBuffer& image,
                             const SegmentMap& segmap, const LimeParams& params);

nlohmann::json lime_params_to_json(const LimeParams& params);
// Missing keys keep their defaults.
LimeParams lime_params_from_json(const nlohmann::json& j);
nlohmann::json lime_explanation_to_json(const LimeExplanation& e);

}  // namespace detxai
