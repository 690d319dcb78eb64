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
#include "detxai/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "detxai/errors.hpp"

namespace detxai {

Box::Box(double x_min, double y_min, double x_max, double y_max)
    : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
  if (!std::isfinite(x_min) || !std::isfinite(y_min) || !std::isfinite(x_max) ||
      !std::isfinite(y_max)) {
    throw InvalidArgument("box coordinates must be finite");
  }
  if (!(x_min < x_max) || !(y_min < y_max)) {
    throw InvalidArgument("box must have positive width and height");
  }
}

bool Box::covers_pixel(int row, int col) const {
  const double cx = col + 0.5;
  const double cy = row + 0.5;
  return cx >= x_min_ && cx < x_max_ && cy >= y_min_ && cy < y_max_;
}

double Box::distance_to(double x, double y) const {
  const double dx = std::max({x_min_ - x, 0.0, x - x_max_});
  const double dy = std::max({y_min_ - y, 0.0, y - y_max_});
  return std::hypot(dx, dy);
}

Detection::Detection(Box b, int cls, double s) : box(b), class_id(cls), score(s) {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw InvalidArgument("detection score must lie in [0,1]");
  }
}

bool detection_order(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.box.x_min() != b.box.x_min()) return a.box.x_min() < b.box.x_min();
  return a.box.y_min() < b.box.y_min();
}

DetectionSet::DetectionSet(std::string image_id, std::vector<Detection> detections)
    : image_id_(std::move(image_id)), detections_(std::move(detections)) {
  std::stable_sort(detections_.begin(), detections_.end(), detection_order);
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double ih = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::optional<std::size_t> match_index(const Detection& target, const DetectionSet& candidates,
                                       double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgument("IoU match threshold must lie in (0,1)");
  }
  std::optional<std::size_t> best;
  double best_iou = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Detection& c = candidates[i];
    if (c.class_id != target.class_id) continue;
    const double v = iou(target.box, c.box);
    if (!(v > delta)) continue;
    if (!best || v > best_iou || (v == best_iou && c.score > candidates[*best].score)) {
      best = i;
      best_iou = v;
    }
  }
  return best;
}

std::optional<Detection> match_detection(const Detection& target,
                                         const DetectionSet& candidates, double delta) {
  if (auto i = match_index(target, candidates, delta)) return candidates[*i];
  return std::nullopt;
}

double matched_confidence(const Detection& target, const DetectionSet& candidates,
                          double delta) {
  auto i = match_index(target, candidates, delta);
  return i ? candidates[*i].score : 0.0;
}

Box dilate_box(const Box& b, int pixels, int image_width, int image_height) {
  if (pixels < 0) throw InvalidArgument("dilation must be non-negative");
  return Box(std::max(0.0, b.x_min() - pixels), std::max(0.0, b.y_min() - pixels),
             std::min<double>(image_width, b.x_max() + pixels),
             std::min<double>(image_height, b.y_max() + pixels));
}

}  // namespace detxai
