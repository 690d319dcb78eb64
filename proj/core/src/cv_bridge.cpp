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
#include "detxai/cv_bridge.hpp"

#include <algorithm>

namespace detxai {

cv::Mat to_bgr_mat(const ImageBuffer& image) {
  cv::Mat m(image.height(), image.width(), CV_32FC3);
  for (int r = 0; r < image.height(); ++r) {
    auto* row = m.ptr<cv::Vec3f>(r);
    for (int c = 0; c < image.width(); ++c) {
      row[c] = cv::Vec3f(image.at(r, c, 2), image.at(r, c, 1), image.at(r, c, 0));
    }
  }
  return m;
}

ImageBuffer from_bgr_mat(const cv::Mat& bgr) {
  CV_Assert(bgr.type() == CV_32FC3);
  ImageBuffer out(bgr.rows, bgr.cols);
  for (int r = 0; r < bgr.rows; ++r) {
    const auto* row = bgr.ptr<cv::Vec3f>(r);
    for (int c = 0; c < bgr.cols; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        out.at(r, c, ch) = std::clamp(row[c][2 - ch], 0.f, 1.f);
      }
    }
  }
  return out;
}

cv::Mat to_mask_mat(const Grid<std::uint8_t>& mask) {
  cv::Mat m(mask.height(), mask.width(), CV_8UC1);
  for (int r = 0; r < mask.height(); ++r) {
    auto* row = m.ptr<std::uint8_t>(r);
    for (int c = 0; c < mask.width(); ++c) row[c] = mask.at(r, c) ? 255 : 0;
  }
  return m;
}

Grid<std::uint8_t> from_mask_mat(const cv::Mat& mask) {
  CV_Assert(mask.type() == CV_8UC1);
  Grid<std::uint8_t> out(mask.rows, mask.cols, 0);
  for (int r = 0; r < mask.rows; ++r) {
    const auto* row = mask.ptr<std::uint8_t>(r);
    for (int c = 0; c < mask.cols; ++c) out.at(r, c) = row[c] ? 1 : 0;
  }
  return out;
}

}  // namespace detxai
