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

// Conversions between library types and cv::Mat. Internal to the core
// library; not installed.

#include <cstdint>

#include <opencv2/core.hpp>

#include "detxai/image.hpp"

namespace detxai {

// CV_32FC3 in BGR channel order.
cv::Mat to_bgr_mat(const ImageBuffer& image);
// Accepts CV_32FC3 BGR; values are clamped to [0,1].
ImageBuffer from_bgr_mat(const cv::Mat& bgr);

// Single-channel 8-bit mask (nonzero = set).
cv::Mat to_mask_mat(const Grid<std::uint8_t>& mask);
Grid<std::uint8_t> from_mask_mat(const cv::Mat& mask);

}  // namespace detxai
