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
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace detxai {

// Axis-aligned box in pixel coordinates, origin at the top-left corner.
// A pixel (row, col) is covered when its center (col + 0.5, row + 0.5)
// lies in [x_min, x_max) x [y_min, y_max).
class Box {
 public:
  Box(double x_min, double y_min, double x_max, double y_max);

  double x_min() const { return x_min_; }
  double y_min() const { return y_min_; }
  double x_max() const { return x_max_; }
  double y_max() const { return y_max_; }
  double width() const { return x_max_ - x_min_; }
  double height() const { return y_max_ - y_min_; }
  double area() const { return width() * height(); }

  bool covers_pixel(int row, int col) const;

  // Euclidean distance from a point to the box; 0 inside.
  double distance_to(double x, double y) const;

  friend bool operator==(const Box&, const Box&) = default;

 private:
  double x_min_;
  double y_min_;
  double x_max_;
  double y_max_;
};

struct Detection {
  Box box;
  int class_id = 0;
  double score = 0.0;

  Detection(Box b, int cls, double s);
  friend bool operator==(const Detection&, const Detection&) = default;
};

struct AnnotationBox {
  Box box;
  int class_id = 0;
  friend bool operator==(const AnnotationBox&, const AnnotationBox&) = default;
};

// Detections of one image, kept in descending score order with ties broken
// by x_min then y_min.
class DetectionSet {
 public:
  DetectionSet() = default;
  DetectionSet(std::string image_id, std::vector<Detection> detections);

  const std::string& image_id() const { return image_id_; }
  const std::vector<Detection>& detections() const { return detections_; }
  std::size_t size() const { return detections_.size(); }
  bool empty() const { return detections_.empty(); }
  const Detection& operator[](std::size_t i) const { return detections_[i]; }
  auto begin() const { return detections_.begin(); }
  auto end() const { return detections_.end(); }

  friend bool operator==(const DetectionSet&, const DetectionSet&) = default;

 private:
  std::string image_id_;
  std::vector<Detection> detections_;
};

// Strict-weak ordering used by DetectionSet.
bool detection_order(const Detection& a, const Detection& b);

double iou(const Box& a, const Box& b);

// Index of the best same-class candidate with IoU strictly above `delta`.
// Ties on IoU go to the higher score, then to the earlier candidate.
std::optional<std::size_t> match_index(const Detection& target, const DetectionSet& candidates,
                                       double delta);

std::optional<Detection> match_detection(const Detection& target,
                                         const DetectionSet& candidates, double delta);

// Matched confidence, or 0 when the target has no match.
double matched_confidence(const Detection& target, const DetectionSet& candidates, double delta);

// Grows the box by `pixels` on every side and clamps it to [0,width]x[0,height].
Box dilate_box(const Box& b, int pixels, int image_width, int image_height);

}  // namespace detxai
