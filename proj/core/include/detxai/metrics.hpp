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

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "detxai/geometry.hpp"
#include "detxai/image.hpp"
#include "detxai/perturb.hpp"

namespace detxai {

struct FidelityParams {
  double attribution_threshold = 0.5;  // "mid- to high-attribution" cut on normalized maps
  void validate() const;
};

// Share of pixels with value >= theta that lie inside any gt box. Absent
// when no pixel reaches theta. Throws on empty gt.
std::optional<double> attribution_ratio(const AttributionMap& map,
                                        std::span<const AnnotationBox> gt, double theta);

// Whether the first (row-major) maximum pixel lies inside any gt box.
bool max_saliency_hit(const AttributionMap& map, std::span<const AnnotationBox> gt);

struct FaithfulnessRecord {
  std::string image_id;
  std::size_t target_index = 0;
  PerturbationKind op = PerturbationKind::kMaskMean;
  double original_confidence = 0.0;   // s_i
  double perturbed_confidence = 0.0;  // s'_i
  double area_fraction = 0.0;
  int segment_count = 0;
  bool completed = true;  // false when the search failed; excluded from FR/CD
};

FaithfulnessRecord faithfulness_record(const std::string& image_id, std::size_t target_index,
                                       const PerturbationResult& result);

// Fraction of records with s' < tau. Throws on an empty list.
double flip_rate(std::span<const FaithfulnessRecord> records, double tau);

struct ConfidenceDrop {
  double mean_drop = 0.0;              // CD_p
  std::optional<double> unflipped_drop;  // CD_flip over U_p = {s' >= tau}; absent if U_p empty
  std::size_t n = 0;
  std::size_t n_unflipped = 0;
};
ConfidenceDrop confidence_drop(std::span<const FaithfulnessRecord> records, double tau);

struct SummaryStat {
  double mean = 0.0;
  double sd = 0.0;  // sample SD (N - 1); 0 when N == 1
  std::size_t n = 0;
  bool single_sample = false;
};
std::optional<SummaryStat> summarize(std::span<const double> values);

// Localization results of one method on one image.
struct FidelityRecord {
  std::string image_id;
  std::string method;
  std::optional<double> attribution_ratio;
  std::optional<bool> image_hit;  // aggregated map argmax inside a gt box
  int box_hits = 0;               // per ground-truth box, via the matched detection's map
  int boxes = 0;
};

struct FidelitySummary {
  std::optional<SummaryStat> attribution_ratio;
  std::size_t images = 0;
  std::size_t ratio_missing = 0;
  std::size_t image_hits = 0;
  std::size_t images_scored = 0;
  std::size_t box_hits = 0;
  std::size_t boxes = 0;
};

struct FaithfulnessSummary {
  std::size_t attempted = 0;
  std::size_t completed = 0;
  std::size_t flipped = 0;
  std::size_t zero_suppressed = 0;
  double flip_rate = 0.0;
  ConfidenceDrop drop;
  std::optional<SummaryStat> area_fraction_flipped;
  std::optional<SummaryStat> segments_flipped;
};

struct MetricsReport {
  nlohmann::json config;
  double tau = 0.5;
  double theta = 0.5;
  std::map<std::string, FidelitySummary> fidelity;        // by method
  std::map<std::string, FaithfulnessSummary> faithfulness;  // by op

  nlohmann::json to_json() const;
};

MetricsReport aggregate_report(std::span<const FidelityRecord> fidelity,
                               std::span<const FaithfulnessRecord> faithfulness, double tau,
                               double theta, nlohmann::json config);

// Per-image rows for external analysis.
std::string per_image_csv(std::span<const FidelityRecord> fidelity,
                          std::span<const FaithfulnessRecord> faithfulness, double tau);

// Structural and range checks against the versioned report schema; returns
// a list of problems (empty when valid).
std::vector<std::string> validate_metrics_json(const nlohmann::json& report);

}  // namespace detxai
