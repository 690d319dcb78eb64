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

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "detxai/errors.hpp"

namespace detxai {

// Dense row-major 2-D array.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{}) : height_(height), width_(width) {
    if (height < 1 || width < 1) throw InvalidArgument("grid dimensions must be >= 1");
    data_.assign(static_cast<std::size_t>(height) * width, fill);
  }
  Grid(int height, int width, std::vector<T> values) : height_(height), width_(width) {
    if (height < 1 || width < 1) throw InvalidArgument("grid dimensions must be >= 1");
    if (values.size() != static_cast<std::size_t>(height) * width) {
      throw InvalidArgument("grid value count does not match its shape");
    }
    data_ = std::move(values);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  T& at(int row, int col) { return data_[static_cast<std::size_t>(row) * width_ + col]; }
  const T& at(int row, int col) const {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  bool same_shape(const Grid& o) const { return height_ == o.height_ && width_ == o.width_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

using RawMap = Grid<double>;

// RGB image with interleaved channels, values in [0,1].
class ImageBuffer {
 public:
  static constexpr int kChannels = 3;

  ImageBuffer() = default;
  ImageBuffer(int height, int width, std::array<float, 3> fill = {0.f, 0.f, 0.f});
  // Throws when any value is outside [0,1] or not finite.
  ImageBuffer(int height, int width, std::vector<float> rgb);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }

  float& at(int row, int col, int ch) { return data_[index(row, col, ch)]; }
  float at(int row, int col, int ch) const { return data_[index(row, col, ch)]; }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  // Rec. 601 luma.
  float luminance(int row, int col) const;
  std::array<double, 3> channel_mean() const;

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * width_ + col) * kChannels + ch;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

// Per-pixel relevance in [0,1].
class AttributionMap {
 public:
  AttributionMap() = default;
  // Wraps an already-normalized grid; throws when any value is outside [0,1].
  static AttributionMap from_normalized(RawMap values);
  static AttributionMap zeros(int height, int width);

  int height() const { return values_.height(); }
  int width() const { return values_.width(); }
  double at(int row, int col) const { return values_.at(row, col); }
  const RawMap& grid() const { return values_; }

  friend bool operator==(const AttributionMap&, const AttributionMap&) = default;

 private:
  explicit AttributionMap(RawMap v) : values_(std::move(v)) {}
  RawMap values_;
};

// (v - min) / (max - min); a constant map becomes all zeros.
AttributionMap minmax_normalize(const RawMap& raw);

// Corner-aligned bilinear resampling: output corners coincide with input corners.
RawMap bilinear_resize(const RawMap& src, int height, int width);

}  // namespace detxai
