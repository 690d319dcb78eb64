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

// Fixtures shared by the unit and acceptance tests.

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <unistd.h>
#include <vector>

#include "detxai/detector.hpp"
#include "detxai/geometry.hpp"
#include "detxai/image.hpp"
#include "detxai/segmentation.hpp"

namespace detxai::testing {

// Uniform image with axis-aligned filled rectangles.
inline ImageBuffer solid(int h, int w, float v) { return ImageBuffer(h, w, std::array<float, 3>{v, v, v}); }

inline void paint(ImageBuffer& img, int r0, int c0, int r1, int c1, float v) {
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) {
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = v;
    }
  }
}

// Labels forming a rows x cols grid of rectangles, id = row-major tile index.
inline SegmentMap grid_segments(const ImageBuffer& img, int rows, int cols) {
  Grid<int> labels(img.height(), img.width(), 0);
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      labels.at(r, c) = (r * rows / img.height()) * cols + (c * cols / img.width());
    }
  }
  return SegmentMap(std::move(labels), to_lab(img));
}

// Detector driven by a callback; counts calls.
class FunctionDetector final : public Detector {
 public:
  using Fn = std::function<DetectionSet(const ImageBuffer&)>;
  explicit FunctionDetector(Fn fn, DetectorConfig config = {})
      : Detector(std::move(config)), fn_(std::move(fn)) {}
  std::string name() const override { return "function"; }
  int calls() const { return calls_; }

 protected:
  std::vector<DetectionSet> run_detect(std::span<const ImageBuffer> images) override {
    std::vector<DetectionSet> out;
    for (const auto& im : images) {
      ++calls_;
      out.push_back(fn_(im));
    }
    return out;
  }

 private:
  Fn fn_;
  std::atomic<int> calls_{0};
};

inline DetectorConfig permissive_config() {
  DetectorConfig c;
  c.score_threshold = 0.0;
  return c;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("detxai_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

}  // namespace detxai::testing
