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
#include "detxai/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "detxai/errors.hpp"
#include "detxai/random.hpp"

namespace detxai {

using nlohmann::json;

namespace {

struct Blob {
  double cx, cy, rx, ry;
};

bool separated(const Blob& a, const Blob& b, int margin) {
  return std::abs(a.cx - b.cx) > a.rx + b.rx + margin || std::abs(a.cy - b.cy) > a.ry + b.ry + margin;
}

bool inside(const Blob& b, double col, double row) {
  const double dx = (col + 0.5 - b.cx) / b.rx, dy = (row + 0.5 - b.cy) / b.ry;
  return dx * dx + dy * dy <= 1.0;
}

}  // namespace

void SyntheticParams::validate() const {
  if (width < 16 || height < 16) throw InvalidArgument("synthetic scenes need at least 16x16 pixels");
  if (min_objects < 0 || max_objects < min_objects) throw InvalidArgument("bad object count range");
  if (distractors < 0) throw InvalidArgument("distractors must be >= 0");
  if (!(min_radius >= 2.0 && max_radius >= min_radius)) throw InvalidArgument("bad radius range");
  if (!(0.0 <= object_max && object_min <= object_max && object_max < background_min &&
        background_min <= background_max && background_max <= 1.0)) {
    throw InvalidArgument("blobs must be darker than the background");
  }
}

SyntheticScene make_scene(const SyntheticParams& p, std::string id) {
  p.validate();
  Rng rng(p.seed);
  const int H = p.height, W = p.width;

  const double base = rng.uniform(p.background_min, p.background_max);
  struct Wave {
    double fx, fy, phase;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < 3; ++i) {
    waves.push_back({rng.uniform(0.5, 2.5) / W, rng.uniform(0.5, 2.5) / H, rng.uniform(0.0, 2 * std::numbers::pi)});
  }
  const std::array<double, 3> tint{0.96, 1.0, 1.04};

  const int wanted = rng.uniform_int(p.min_objects, p.max_objects) + p.distractors;
  std::vector<Blob> blobs;
  for (int attempt = 0; attempt < 2000 && static_cast<int>(blobs.size()) < wanted; ++attempt) {
    Blob b{0, 0, rng.uniform(p.min_radius, p.max_radius), 0};
    b.ry = std::clamp(b.rx * rng.uniform(0.6, 1.0), p.min_radius * 0.6, p.max_radius);
    const double mx = b.rx + p.margin, my = b.ry + p.margin;
    if (2 * mx >= W || 2 * my >= H) continue;
    b.cx = rng.uniform(mx, W - mx);
    b.cy = rng.uniform(my, H - my);
    if (std::all_of(blobs.begin(), blobs.end(), [&](const Blob& o) { return separated(b, o, 2 * p.margin); })) {
      blobs.push_back(b);
    }
  }
  std::vector<double> level;
  for (std::size_t i = 0; i < blobs.size(); ++i) level.push_back(rng.uniform(p.object_min, p.object_max));

  SyntheticScene scene;
  scene.id = std::move(id);
  scene.image = ImageBuffer(H, W);
  std::vector<std::array<int, 4>> extent(blobs.size(), {W, H, -1, -1});  // c0, r0, c1, r1
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      double lum = base;
      for (const auto& w : waves) {
        lum += p.texture_amplitude / 3.0 * std::sin(2 * std::numbers::pi * (w.fx * c + w.fy * r) + w.phase);
      }
      for (std::size_t i = 0; i < blobs.size(); ++i) {
        if (inside(blobs[i], c, r)) {
          lum = level[i];
          auto& e = extent[i];
          e = {std::min(e[0], c), std::min(e[1], r), std::max(e[2], c), std::max(e[3], r)};
        }
      }
      for (int ch = 0; ch < 3; ++ch) {
        const double v = lum * tint[ch] + rng.uniform(-p.pixel_noise, p.pixel_noise);
        scene.image.at(r, c, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }

  const std::size_t annotated = blobs.size() - std::min<std::size_t>(blobs.size(), p.distractors);
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    const auto& e = extent[i];
    if (e[2] < 0) continue;
    const Box box(e[0], e[1], e[2] + 1, e[3] + 1);
    if (i < annotated) {
      scene.annotations.push_back({box, 0});
    } else {
      scene.distractors.push_back(box);
    }
  }
  return scene;
}

json labelme_json(const SyntheticScene& scene, const std::string& image_file, const std::string& label) {
  json shapes = json::array();
  for (const auto& a : scene.annotations) {
    shapes.push_back({{"label", label},
                      {"points", {{a.box.x_min(), a.box.y_min()}, {a.box.x_max(), a.box.y_max()}}},
                      {"shape_type", "rectangle"},
                      {"group_id", nullptr},
                      {"flags", json::object()}});
  }
  return {{"version", "5.0.1"},
          {"flags", json::object()},
          {"shapes", std::move(shapes)},
          {"imagePath", image_file},
          {"imageData", nullptr},
          {"imageHeight", scene.image.height()},
          {"imageWidth", scene.image.width()}};
}

json coco_json(std::span<const SyntheticScene> scenes, std::span<const std::string> image_files,
               const std::string& label) {
  if (scenes.size() != image_files.size()) throw InvalidArgument("one file name per scene expected");
  json images = json::array(), anns = json::array();
  int ann_id = 1;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& s = scenes[i];
    images.push_back({{"id", i + 1}, {"file_name", image_files[i]}, {"width", s.image.width()},
                      {"height", s.image.height()}});
    for (const auto& a : s.annotations) {
      const auto& b = a.box;
      anns.push_back({{"id", ann_id++},
                      {"image_id", i + 1},
                      {"category_id", 1},
                      {"bbox", {b.x_min(), b.y_min(), b.width(), b.height()}},
                      {"area", b.area()},
                      {"iscrowd", 0}});
    }
  }
  return {{"images", std::move(images)},
          {"annotations", std::move(anns)},
          {"categories", json::array({{{"id", 1}, {"name", label}}})}};
}

}  // namespace detxai
