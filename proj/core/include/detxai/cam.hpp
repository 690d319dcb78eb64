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

#include <span>
#include <string>
#include <vector>

#include "detxai/detector.hpp"
#include "detxai/image.hpp"

namespace detxai {

enum class CamMethod { kLayerCam, kHiResCam };
enum class Aggregation { kMax, kMean };

std::string to_string(CamMethod m);
CamMethod cam_method_from_string(std::string_view s);
std::string to_string(Aggregation a);
Aggregation aggregation_from_string(std::string_view s);

// sum_k ReLU(G_k) * A_k
RawMap layercam_raw(const FeatureTensor& activations, const FeatureTensor& gradients);
// ReLU(sum_k A_k * G_k)
RawMap hirescam_raw(const FeatureTensor& activations, const FeatureTensor& gradients);
RawMap cam_raw(CamMethod method, const FeatureTensor& activations, const FeatureTensor& gradients);

// Raw map of the introspected target, upsampled to the image and normalized.
AttributionMap cam_from_introspection(CamMethod method, const IntrospectionResult& result,
                                      int image_height, int image_width);

// Introspects one detection and renders its map. Propagates CapabilityError.
AttributionMap explain_detection(Detector& detector, const ImageBuffer& image,
                                 const Detection& target, CamMethod method,
                                 std::string_view layer = {});

// Pixel-wise max or mean, then re-normalized. Throws on an empty list.
AttributionMap aggregate_maps(std::span<const AttributionMap> maps, Aggregation mode = Aggregation::kMax);

struct CamRequest {
  ImageBuffer image;
  std::vector<std::size_t> targets;  // indices into `detections`; empty = all
  std::string layer;
  CamMethod method = CamMethod::kLayerCam;
  Aggregation aggregation = Aggregation::kMax;
};

struct CamResult {
  std::vector<AttributionMap> per_detection;  // aligned with the requested targets
  AttributionMap aggregated;
};

// Explains every requested detection of `detections` and aggregates.
CamResult explain_image(Detector& detector, const CamRequest& request,
                        const DetectionSet& detections);

}  // namespace detxai
