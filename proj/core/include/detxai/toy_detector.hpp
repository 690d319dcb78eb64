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

#include "detxai/detector.hpp"

namespace detxai {

struct ToyDetectorParams {
  double contrast_threshold = 0.1;  // minimum blob-vs-surround luminance contrast
  double contrast_max = 0.4;        // contrast that maps to score 1
  int min_area = 16;                // pixels
  // Pixels darker than background by this fraction of contrast_threshold
  // seed a candidate region.
  double candidate_fraction = 0.5;
  // Luminance below this is treated as no-data and never belongs to a blob.
  double void_level = 0.02;
  int surround_px = 3;
  int class_id = 0;

  void validate() const;
};

// Deterministic dark-blob detector used as a test oracle. Connected dark
// regions whose mean luminance sits at least contrast_threshold below
// their surround become detections scored clamp(contrast / contrast_max).
// Background luminance is the median over non-void pixels.
DetectionSet toy_detect(const ImageBuffer& image, const ToyDetectorParams& params);

class ToyDetector final : public Detector {
 public:
  explicit ToyDetector(DetectorConfig config = {}, ToyDetectorParams params = {});

  std::string name() const override { return "toy"; }
  const ToyDetectorParams& params() const { return params_; }

 protected:
  std::vector<DetectionSet> run_detect(std::span<const ImageBuffer> images) override;

 private:
  ToyDetectorParams params_;
};

}  // namespace detxai
