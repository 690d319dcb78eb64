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
#include "detxai/image.hpp"

#include <algorithm>
#include <cmath>

namespace detxai {

ImageBuffer::ImageBuffer(int height, int width, std::array<float, 3> fill)
    : height_(height), width_(width) {
  if (height < 1 || width < 1) throw InvalidArgument("image dimensions must be >= 1");
  for (float f : fill) {
    if (!(f >= 0.f && f <= 1.f)) throw InvalidArgument("image fill must lie in [0,1]");
  }
  data_.resize(pixel_count() * kChannels);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] = fill[i % kChannels];
}

ImageBuffer::ImageBuffer(int height, int width, std::vector<float> rgb)
    : height_(height), width_(width), data_(std::move(rgb)) {
  if (height < 1 || width < 1) throw InvalidArgument("image dimensions must be >= 1");
  if (data_.size() != pixel_count() * kChannels) {
    throw InvalidArgument("image value count does not match its shape");
  }
  for (float v : data_) {
    if (!(v >= 0.f && v <= 1.f)) throw InvalidArgument("image values must lie in [0,1]");
  }
}

float ImageBuffer::luminance(int row, int col) const {
  const std::size_t i = index(row, col, 0);
  return 0.299f * data_[i] + 0.587f * data_[i + 1] + 0.114f * data_[i + 2];
}

std::array<double, 3> ImageBuffer::channel_mean() const {
  std::array<double, 3> sum{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < data_.size(); ++i) sum[i % kChannels] += data_[i];
  const double n = static_cast<double>(pixel_count());
  for (double& s : sum) s /= n;
  return sum;
}

AttributionMap AttributionMap::from_normalized(RawMap values) {
  for (double v : values.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("attribution values must lie in [0,1]");
  }
  return AttributionMap(std::move(values));
}

AttributionMap AttributionMap::zeros(int height, int width) {
  return AttributionMap(RawMap(height, width, 0.0));
}

AttributionMap minmax_normalize(const RawMap& raw) {
  auto vals = raw.values();
  for (double v : vals) {
    if (!std::isfinite(v)) throw InvalidArgument("cannot normalize non-finite map values");
  }
  const auto [lo_it, hi_it] = std::minmax_element(vals.begin(), vals.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  RawMap out(raw.height(), raw.width(), 0.0);
  if (hi > lo) {
    const double range = hi - lo;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = std::clamp((vals[i] - lo) / range, 0.0, 1.0);
      if (vals[i] == hi) out[i] = 1.0;
    }
  }
  return AttributionMap::from_normalized(std::move(out));
}

RawMap bilinear_resize(const RawMap& src, int height, int width) {
  RawMap out(height, width, 0.0);
  const double sy = height > 1 ? static_cast<double>(src.height() - 1) / (height - 1) : 0.0;
  const double sx = width > 1 ? static_cast<double>(src.width() - 1) / (width - 1) : 0.0;
  for (int r = 0; r < height; ++r) {
    const double y = r * sy;
    const int y0 = std::min(static_cast<int>(std::floor(y)), src.height() - 1);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double fy = y - y0;
    for (int c = 0; c < width; ++c) {
      const double x = c * sx;
      const int x0 = std::min(static_cast<int>(std::floor(x)), src.width() - 1);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double fx = x - x0;
      const double top = (1.0 - fx) * src.at(y0, x0) + fx * src.at(y0, x1);
      const double bot = (1.0 - fx) * src.at(y1, x0) + fx * src.at(y1, x1);
      out.at(r, c) = (1.0 - fy) * top + fy * bot;
    }
  }
  return out;
}

}  // namespace detxai
