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

#include "detxai/geometry.hpp"
#include "detxai/image.hpp"

namespace detxai {

// Dark elliptical blobs on a bright textured background. Annotated blobs
// stand in for animals; distractors are identical blobs left unannotated.
struct SyntheticParams {
  int width = 128;
  int height = 128;
  int min_objects = 1;
  int max_objects = 3;
  int distractors = 0;
  double min_radius = 7.0;
  double max_radius = 12.0;
  double background_min = 0.60;
  double background_max = 0.80;
  double object_min = 0.12;
  double object_max = 0.30;
  double texture_amplitude = 0.04;
  double pixel_noise = 0.02;
  int margin = 4;  // minimum gap between blobs and to the border
  std::string label = "seal";
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticScene {
  std::string id;
  ImageBuffer image;
  std::vector<AnnotationBox> annotations;  // tight pixel boxes of annotated blobs
  std::vector<Box> distractors;            // tight pixel boxes of unannotated blobs
};

SyntheticScene make_scene(const SyntheticParams& params, std::string id);

// Labelme document for one scene.
nlohmann::json labelme_json(const SyntheticScene& scene, const std::string& image_file,
                            const std::string& label = "seal");

// One COCO document covering all scenes.
nlohmann::json coco_json(std::span<const SyntheticScene> scenes, std::span<const std::string> image_files,
                         const std::string& label = "seal");

}  // namespace detxai
