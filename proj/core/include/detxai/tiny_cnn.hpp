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
#include <vector>

#include "detxai/detector.hpp"

namespace detxai {

// Weights of a two-layer convolutional detector:
//   features A = ReLU(conv_4x4_stride4(image) + b1)          K x ceil(H/4) x ceil(W/4)
//   logits   z = conv_3x3_pad1(A) + b2                       ceil(H/4) x ceil(W/4)
// Cells with z > 0 form 4-connected components; each component's bounding
// rectangle is a detection whose class logit is the log-mean-exp of z over
// the cells it covers, and whose score is sigmoid(logit).
struct TinyCnnWeights {
  static constexpr int kPatch = 4;
  static constexpr int kHead = 3;

  int channels = 0;
  std::vector<double> conv;       // [K][3][kPatch][kPatch]
  std::vector<double> conv_bias;  // [K]
  std::vector<double> head;       // [K][kHead][kHead]
  double head_bias = 0.0;

  // Hand-set dark-blob weights.
  static TinyCnnWeights dark_blob();
  // Uniform(-1, 1) weights; used to exercise the gradient path.
  static TinyCnnWeights random(int channels, std::uint64_t seed);

  double conv_at(int k, int c, int dy, int dx) const {
    return conv[((static_cast<std::size_t>(k) * 3 + c) * kPatch + dy) * kPatch + dx];
  }
  double head_at(int k, int i, int j) const {
    return head[(static_cast<std::size_t>(k) * kHead + i) * kHead + j];
  }
  void validate() const;
};

class TinyCnnDetector final : public Detector {
 public:
  static constexpr const char* kFeatureLayer = "features";

  explicit TinyCnnDetector(DetectorConfig config = {},
                           TinyCnnWeights weights = TinyCnnWeights::dark_blob(), int class_id = 0);

  std::string name() const override { return "tinycnn"; }
  bool supports_introspection() const override { return true; }
  std::vector<std::string> layers() const override { return {kFeatureLayer}; }

  IntrospectionResult introspect(const ImageBuffer& image, const Detection& target,
                                 std::string_view layer) override;

  FeatureTensor features(const ImageBuffer& image) const;
  RawMap logits(const FeatureTensor& features) const;
  // Class logit of a detection covering `box`, as a function of the features.
  double target_logit(const FeatureTensor& features, const Box& box, int image_height,
                      int image_width) const;
  // Analytic gradient of target_logit with respect to the features.
  FeatureTensor target_gradient(const FeatureTensor& features, const Box& box,
                                int image_height, int image_width) const;

  const TinyCnnWeights& weights() const { return weights_; }

 protected:
  std::vector<DetectionSet> run_detect(std::span<const ImageBuffer> images) override;

 private:
  DetectionSet detect_image(const ImageBuffer& image) const;

  TinyCnnWeights weights_;
  int class_id_;
};

}  // namespace detxai
