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
#include "detxai/cam.hpp"

#include <algorithm>

#include "detxai/errors.hpp"

namespace detxai {
namespace {

void check_shapes(const FeatureTensor& a, const FeatureTensor& g) {
  if (!a.same_shape(g)) throw InvalidArgument("activation and gradient shapes differ");
}

}  // namespace

std::string to_string(CamMethod m) { return m == CamMethod::kLayerCam ? "layercam" : "hirescam"; }

CamMethod cam_method_from_string(std::string_view s) {
  if (s == "layercam") return CamMethod::kLayerCam;
  if (s == "hirescam") return CamMethod::kHiResCam;
  throw InvalidArgument("unknown CAM method '" + std::string(s) + "'");
}

std::string to_string(Aggregation a) { return a == Aggregation::kMax ? "max" : "mean"; }

Aggregation aggregation_from_string(std::string_view s) {
  if (s == "max") return Aggregation::kMax;
  if (s == "mean") return Aggregation::kMean;
  throw InvalidArgument("unknown aggregation '" + std::string(s) + "'");
}

RawMap layercam_raw(const FeatureTensor& a, const FeatureTensor& g) {
  check_shapes(a, g);
  RawMap out(a.height(), a.width(), 0.0);
  for (int k = 0; k < a.channels(); ++k) {
    for (int u = 0; u < a.height(); ++u) {
      for (int v = 0; v < a.width(); ++v) {
        out.at(u, v) += std::max(g.at(k, u, v), 0.0) * a.at(k, u, v);
      }
    }
  }
  return out;
}

RawMap hirescam_raw(const FeatureTensor& a, const FeatureTensor& g) {
  check_shapes(a, g);
  RawMap out(a.height(), a.width(), 0.0);
  for (int k = 0; k < a.channels(); ++k) {
    for (int u = 0; u < a.height(); ++u) {
      for (int v = 0; v < a.width(); ++v) out.at(u, v) += a.at(k, u, v) * g.at(k, u, v);
    }
  }
  for (double& x : out.values()) x = std::max(x, 0.0);
  return out;
}

RawMap cam_raw(CamMethod method, const FeatureTensor& a, const FeatureTensor& g) {
  return method == CamMethod::kLayerCam ? layercam_raw(a, g) : hirescam_raw(a, g);
}

AttributionMap cam_from_introspection(CamMethod method, const IntrospectionResult& result,
                                      int image_height, int image_width) {
  const RawMap raw = cam_raw(method, result.activations, result.gradients);
  return minmax_normalize(bilinear_resize(raw, image_height, image_width));
}

AttributionMap explain_detection(Detector& detector, const ImageBuffer& image,
                                 const Detection& target, CamMethod method,
                                 std::string_view layer) {
  const std::string_view use = layer.empty() ? std::string_view(detector.config().layer_name) : layer;
  const IntrospectionResult r = detector.introspect(image, target, use);
  return cam_from_introspection(method, r, image.height(), image.width());
}

AttributionMap aggregate_maps(std::span<const AttributionMap> maps, Aggregation mode) {
  if (maps.empty()) throw InvalidArgument("cannot aggregate an empty list of maps");
  if (maps.size() == 1) return maps.front();
  const int h = maps.front().height();
  const int w = maps.front().width();
  RawMap acc(h, w, 0.0);
  for (const auto& m : maps) {
    if (m.height() != h || m.width() != w) throw InvalidArgument("attribution map shapes differ");
    for (std::size_t i = 0; i < acc.size(); ++i) {
      const double v = m.grid()[i];
      acc[i] = mode == Aggregation::kMax ? std::max(acc[i], v) : acc[i] + v;
    }
  }
  if (mode == Aggregation::kMean) {
    for (double& v : acc.values()) v /= static_cast<double>(maps.size());
  }
  return minmax_normalize(acc);
}

CamResult explain_image(Detector& detector, const CamRequest& request,
                        const DetectionSet& detections) {
  std::vector<std::size_t> targets = request.targets;
  if (targets.empty()) {
    for (std::size_t i = 0; i < detections.size(); ++i) targets.push_back(i);
  }
  if (targets.empty()) throw NoDetectionsError("no detections to explain");
  CamResult out;
  for (std::size_t t : targets) {
    if (t >= detections.size()) throw InvalidArgument("CAM target index out of range");
    out.per_detection.push_back(
        explain_detection(detector, request.image, detections[t], request.method, request.layer));
  }
  out.aggregated = aggregate_maps(out.per_detection, request.aggregation);
  return out;
}

}  // namespace detxai
