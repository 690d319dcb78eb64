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
// Writes synthetic blob scenes as PNG tiles with Labelme and COCO annotations.
// distractors.json lists the unannotated blobs per tile, so a triage run can
// be checked against them.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "detxai/image_io.hpp"
#include "detxai/synthetic.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"generate synthetic detection scenes"};
  fs::path out = "synthetic";
  int count = 20;
  detxai::SyntheticParams params;
  std::uint64_t seed = 0;
  int distractor_every = 0;
  app.add_option("-o,--out", out, "output directory");
  app.add_option("-n,--count", count, "number of scenes")->check(CLI::PositiveNumber);
  app.add_option("--size", params.width, "tile width and height")->check(CLI::Range(16, 4096));
  app.add_option("--min-objects", params.min_objects);
  app.add_option("--max-objects", params.max_objects);
  app.add_option("--distractors", params.distractors, "unannotated blobs per distractor scene");
  app.add_option("--distractor-every", distractor_every, "put distractors in every k-th scene (0: all)");
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);
  params.height = params.width;

  try {
    std::vector<detxai::SyntheticScene> scenes;
    std::vector<std::string> files;
    std::size_t distractors = 0;
    nlohmann::json sidecar = nlohmann::json::object();
    for (int i = 0; i < count; ++i) {
      auto p = params;
      p.seed = seed * 1000003 + static_cast<std::uint64_t>(i);
      if (distractor_every > 0 && i % distractor_every != 0) p.distractors = 0;
      char id[32];
      std::snprintf(id, sizeof id, "tile_%04d", i);
      auto scene = detxai::make_scene(p, id);
      const std::string file = std::string(id) + ".png";
      detxai::save_png(out / "images" / file, scene.image);
      detxai::write_text_file(out / "labelme" / (std::string(id) + ".json"),
                              detxai::labelme_json(scene, file, params.label).dump(2) + "\n");
      distractors += scene.distractors.size();
      auto& boxes = sidecar[id] = nlohmann::json::array();
      for (const auto& b : scene.distractors) boxes.push_back({b.x_min(), b.y_min(), b.x_max(), b.y_max()});
      files.push_back(file);
      scenes.push_back(std::move(scene));
    }
    detxai::write_text_file(out / "coco.json", detxai::coco_json(scenes, files, params.label).dump(2) + "\n");
    detxai::write_text_file(out / "distractors.json", sidecar.dump(2) + "\n");
    std::cout << "wrote " << count << " scenes, " << distractors << " unannotated distractors\n";
  } catch (const std::exception& e) {
    std::cerr << "detxai-synth: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
