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
#include "detxai/toy_detector.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgproc.hpp>

#include "detxai/errors.hpp"

namespace detxai {
namespace {

// Float luminance differences near the threshold are resolved in favour of detection.
constexpr double kContrastTolerance = 1e-5;

}  // namespace

void ToyDetectorParams::validate() const {
  if (!(contrast_threshold > 0.0)) throw InvalidArgument("contrast_threshold must be > 0");
  if (!(contrast_max >= contrast_threshold)) {
    throw InvalidArgument("contrast_max must be >= contrast_threshold");
  }
  if (min_area < 1) throw InvalidArgument("min_area must be >= 1");
  if (!(candidate_fraction > 0.0 && candidate_fraction <= 1.0)) {
    throw InvalidArgument("candidate_fraction must lie in (0,1]");
  }
  if (surround_px < 1) throw InvalidArgument("surround_px must be >= 1");
}

DetectionSet toy_detect(const ImageBuffer& image, const ToyDetectorParams& params) {
  const int h = image.height();
  const int w = image.width();
  cv::Mat lum(h, w, CV_64FC1);
  std::vector<double> valid;
  valid.reserve(image.pixel_count());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double y = image.luminance(r, c);
      lum.at<double>(r, c) = y;
      if (y >= params.void_level) valid.push_back(y);
    }
  }
  if (valid.empty()) return {};
  auto mid = valid.begin() + static_cast<std::ptrdiff_t>(valid.size() / 2);
  std::nth_element(valid.begin(), mid, valid.end());
  const double background = *mid;
  const double cut = background - params.candidate_fraction * params.contrast_threshold;

  cv::Mat candidate(h, w, CV_8UC1, cv::Scalar(0));
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double y = lum.at<double>(r, c);
      if (y >= params.void_level && y <= cut) candidate.at<std::uint8_t>(r, c) = 1;
    }
  }

  cv::Mat labels, stats, centroids;
  const int n = cv::connectedComponentsWithStats(candidate, labels, stats, centroids, 4, CV_32S);
  std::vector<Detection> out;
  for (int label = 1; label < n; ++label) {
    const int area = stats.at<int>(label, cv::CC_STAT_AREA);
    if (area < params.min_area) continue;
    const int x0 = stats.at<int>(label, cv::CC_STAT_LEFT);
    const int y0 = stats.at<int>(label, cv::CC_STAT_TOP);
    const int bw = stats.at<int>(label, cv::CC_STAT_WIDTH);
    const int bh = stats.at<int>(label, cv::CC_STAT_HEIGHT);

    double blob_sum = 0.0;
    for (int r = y0; r < y0 + bh; ++r) {
      for (int c = x0; c < x0 + bw; ++c) {
        if (labels.at<int>(r, c) == label) blob_sum += lum.at<double>(r, c);
      }
    }
    const double blob_mean = blob_sum / area;

    // Surround: non-candidate, non-void pixels within surround_px of the bbox.
    const int sr0 = std::max(0, y0 - params.surround_px);
    const int sr1 = std::min(h, y0 + bh + params.surround_px);
    const int sc0 = std::max(0, x0 - params.surround_px);
    const int sc1 = std::min(w, x0 + bw + params.surround_px);
    double sur_sum = 0.0;
    int sur_n = 0;
    for (int r = sr0; r < sr1; ++r) {
      for (int c = sc0; c < sc1; ++c) {
        const double y = lum.at<double>(r, c);
        if (candidate.at<std::uint8_t>(r, c) || y < params.void_level) continue;
        sur_sum += y;
        ++sur_n;
      }
    }
    const double surround = sur_n > 0 ? sur_sum / sur_n : background;
    const double contrast = surround - blob_mean;
    if (contrast + kContrastTolerance < params.contrast_threshold) continue;
    const double score = std::clamp(contrast / params.contrast_max, 0.0, 1.0);
    out.emplace_back(Box(x0, y0, x0 + bw, y0 + bh), params.class_id, score);
  }
  return DetectionSet("", std::move(out));
}

ToyDetector::ToyDetector(DetectorConfig config, ToyDetectorParams params)
    : Detector(std::move(config)), params_(params) {
  params_.validate();
}

std::vector<DetectionSet> ToyDetector::run_detect(std::span<const ImageBuffer> images) {
  std::vector<DetectionSet> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(toy_detect(img, params_));
  return out;
}

}  // namespace detxai
