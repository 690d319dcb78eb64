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
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "detxai/geometry.hpp"
#include "detxai/image.hpp"

namespace detxai {

enum class FpCategory {
  kMissedAnnotation,
  kDarkEdgeShape,
  kDarkOpenWater,
  kMergedDetection,
  kBlackIce,
  kOther,
  kUnreviewed,
};

std::string_view to_string(FpCategory c);
FpCategory fp_category_from_string(std::string_view s);
std::span<const FpCategory> all_fp_categories();

struct FalsePositive {
  std::string image_id;
  std::size_t detection_index = 0;  // index into the image's DetectionSet
  Detection detection{Box(0, 0, 1, 1), 0, 0.0};
  double best_gt_iou = 0.0;
  std::map<std::string, std::string> explanations;  // method -> map path
  std::string overlay;
  FpCategory category = FpCategory::kUnreviewed;
  std::string note;

  friend bool operator==(const FalsePositive&, const FalsePositive&) = default;
};

struct TriageThresholds {
  double iou = 0.5;
  double score = 0.5;
  void validate() const;
};

// Greedy one-to-one matching by descending IoU; every detection above the
// score threshold left unmatched is reported. best_gt_iou is measured
// against same-class boxes not claimed by another detection.
std::vector<FalsePositive> find_false_positives(const DetectionSet& detections,
                                                std::span<const AnnotationBox> gt,
                                                const TriageThresholds& thresholds = {});

// Colormapped attribution blended at alpha 0.45 where the map is nonzero,
// detections as solid red boxes with their score, gt as dashed green boxes.
// Returns 8-bit RGB PNG bytes.
std::vector<std::uint8_t> render_overlay(const ImageBuffer& image, const AttributionMap* map,
                                         const DetectionSet& detections,
                                         std::span<const AnnotationBox> gt);

struct TriageReport {
  TriageThresholds thresholds;
  std::vector<FalsePositive> items;
  std::string notes;

  std::map<std::string, std::size_t> counts() const;
  nlohmann::json to_json() const;
  std::string dump() const;
  static TriageReport from_json(const nlohmann::json& j);
};

struct TriageEvidence {
  ImageBuffer image;
  std::optional<AttributionMap> map;
  DetectionSet detections;
  std::vector<AnnotationBox> gt;
};

// Renders one overlay per image holding an FP into overlay_dir and writes the
// report to report_path. Overlay paths are stored relative to the report.
TriageReport build_triage_report(std::vector<FalsePositive> fps,
                                 const std::map<std::string, TriageEvidence>& evidence,
                                 const std::filesystem::path& overlay_dir,
                                 const std::filesystem::path& report_path,
                                 const TriageThresholds& thresholds = {});

TriageReport load_triage_report(const std::filesystem::path& path);
void save_triage_report(const TriageReport& report, const std::filesystem::path& path);

}  // namespace detxai
