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
#include "detxai/detector.hpp"

#include <algorithm>
#include <cmath>

#include "detxai/errors.hpp"

namespace detxai {

FeatureTensor::FeatureTensor(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels < 1 || height < 1 || width < 1) {
    throw InvalidArgument("feature tensor dimensions must be >= 1");
  }
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

FeatureTensor::FeatureTensor(int channels, int height, int width, std::vector<double> values)
    : FeatureTensor(channels, height, width) {
  if (values.size() != data_.size()) {
    throw InvalidArgument("feature tensor value count does not match its shape");
  }
  data_ = std::move(values);
}

void DetectorConfig::validate() const {
  if (!(score_threshold >= 0.0 && score_threshold < 1.0)) {
    throw InvalidArgument("score_threshold must lie in [0,1)");
  }
  if (batch_limit < 1) throw InvalidArgument("batch_limit must be >= 1");
}

Detector::Detector(DetectorConfig config) : config_(std::move(config)) { config_.validate(); }

std::vector<DetectionSet> Detector::detect(std::span<const ImageBuffer> images) {
  if (images.size() > config_.batch_limit) {
    throw InvalidArgument("batch of " + std::to_string(images.size()) +
                          " images exceeds batch_limit " + std::to_string(config_.batch_limit));
  }
  std::vector<DetectionSet> raw = run_detect(images);
  if (raw.size() != images.size()) {
    throw AdapterError(name() + " returned " + std::to_string(raw.size()) +
                       " detection sets for " + std::to_string(images.size()) + " images");
  }
  for (auto& set : raw) set = filter_by_score(set, config_.score_threshold);
  return raw;
}

DetectionSet Detector::detect_one(const ImageBuffer& image) {
  return detect(std::span(&image, 1)).front();
}

IntrospectionResult Detector::introspect(const ImageBuffer&, const Detection&, std::string_view) {
  throw CapabilityError(name() + " does not expose activations or gradients");
}

std::vector<DetectionSet> detect_all(Detector& detector, std::span<const ImageBuffer> images) {
  std::vector<DetectionSet> out;
  out.reserve(images.size());
  const std::size_t step = detector.config().batch_limit;
  for (std::size_t i = 0; i < images.size(); i += step) {
    auto part = detector.detect(images.subspan(i, std::min(step, images.size() - i)));
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

DetectionSet filter_by_score(const DetectionSet& set, double threshold) {
  std::vector<Detection> kept;
  for (const auto& d : set) {
    if (d.score >= threshold) kept.push_back(d);
  }
  return DetectionSet(set.image_id(), std::move(kept));
}

}  // namespace detxai
