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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detxai/geometry.hpp"
#include "detxai/image.hpp"

namespace detxai {

// K x U x V activation or gradient tensor, channel-major.
class FeatureTensor {
 public:
  FeatureTensor() = default;
  FeatureTensor(int channels, int height, int width, double fill = 0.0);
  FeatureTensor(int channels, int height, int width, std::vector<double> values);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  double& at(int k, int u, int v) { return data_[index(k, u, v)]; }
  double at(int k, int u, int v) const { return data_[index(k, u, v)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  std::span<const double> values() const { return data_; }

  bool same_shape(const FeatureTensor& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }

  friend bool operator==(const FeatureTensor&, const FeatureTensor&) = default;

 private:
  std::size_t index(int k, int u, int v) const {
    return (static_cast<std::size_t>(k) * height_ + u) * width_ + v;
  }
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

struct IntrospectionResult {
  FeatureTensor activations;
  FeatureTensor gradients;  // d(target_value) / d(activations)
  std::size_t target_detection_index = 0;
  double target_value = 0.0;  // pre-sigmoid class score of the target
};

struct DetectorConfig {
  double score_threshold = 0.5;
  std::string layer_name;  // empty selects the backend's last feature block
  std::size_t batch_limit = 64;

  void validate() const;
};

// Uniform contract over detector backends. detect() returns post-NMS
// detections filtered by the configured score threshold.
class Detector {
 public:
  explicit Detector(DetectorConfig config);
  virtual ~Detector() = default;
  Detector(const Detector&) = delete;
  Detector& operator=(const Detector&) = delete;

  const DetectorConfig& config() const { return config_; }

  // At most config().batch_limit images per call.
  std::vector<DetectionSet> detect(std::span<const ImageBuffer> images);
  DetectionSet detect_one(const ImageBuffer& image);

  virtual std::string name() const = 0;
  virtual bool supports_introspection() const { return false; }
  virtual std::vector<std::string> layers() const { return {}; }

  // Throws CapabilityError unless supports_introspection().
  virtual IntrospectionResult introspect(const ImageBuffer& image, const Detection& target,
                                         std::string_view layer);

 protected:
  // Unfiltered detections, one set per image.
  virtual std::vector<DetectionSet> run_detect(std::span<const ImageBuffer> images) = 0;

 private:
  DetectorConfig config_;
};

// Splits `images` into batch_limit-sized calls.
std::vector<DetectionSet> detect_all(Detector& detector, std::span<const ImageBuffer> images);

// Drops detections below `threshold` and restores the stable order.
DetectionSet filter_by_score(const DetectionSet& set, double threshold);

}  // namespace detxai
