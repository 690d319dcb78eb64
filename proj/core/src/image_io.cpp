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
#include "detxai/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "detxai/cv_bridge.hpp"

namespace detxai {
namespace {

ImageBuffer from_decoded(const cv::Mat& decoded, const std::string& what) {
  if (decoded.empty()) throw IoError("cannot decode image: " + what);
  cv::Mat bgr;
  if (decoded.channels() == 1) {
    cv::cvtColor(decoded, bgr, cv::COLOR_GRAY2BGR);
  } else if (decoded.channels() == 4) {
    cv::cvtColor(decoded, bgr, cv::COLOR_BGRA2BGR);
  } else {
    bgr = decoded;
  }
  double scale = 1.0;
  switch (bgr.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    case CV_32F: scale = 1.0; break;
    default: throw IoError("unsupported image bit depth: " + what);
  }
  cv::Mat f;
  bgr.convertTo(f, CV_32FC3, scale);
  return from_bgr_mat(f);
}

}  // namespace

std::vector<std::uint8_t> encode_png(const ImageBuffer& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw InvalidArgument("PNG bit depth must be 8 or 16");
  cv::Mat bgr = to_bgr_mat(image);
  cv::Mat out;
  if (bit_depth == 8) {
    bgr.convertTo(out, CV_8UC3, 255.0);
  } else {
    bgr.convertTo(out, CV_16UC3, 65535.0);
  }
  std::vector<std::uint8_t> bytes;
  if (!cv::imencode(".png", out, bytes)) throw IoError("PNG encoding failed");
  return bytes;
}

ImageBuffer decode_png(std::span<const std::uint8_t> bytes) {
  cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  return from_decoded(cv::imdecode(buf, cv::IMREAD_ANYDEPTH | cv::IMREAD_ANYCOLOR), "PNG bytes");
}

ImageBuffer load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("image not found: " + path.string());
  return from_decoded(cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_ANYCOLOR),
                      path.string());
}

void save_png(const std::filesystem::path& path, const ImageBuffer& image, int bit_depth) {
  write_file_bytes(path, encode_png(image, bit_depth));
}

std::vector<std::uint8_t> encode_map_png(const AttributionMap& map) {
  cv::Mat m(map.height(), map.width(), CV_16UC1);
  for (int r = 0; r < map.height(); ++r) {
    auto* row = m.ptr<std::uint16_t>(r);
    for (int c = 0; c < map.width(); ++c) {
      row[c] = static_cast<std::uint16_t>(std::lround(map.at(r, c) * 65535.0));
    }
  }
  std::vector<std::uint8_t> bytes;
  if (!cv::imencode(".png", m, bytes)) throw IoError("PNG encoding failed");
  return bytes;
}

void save_map_png(const std::filesystem::path& path, const AttributionMap& map) {
  write_file_bytes(path, encode_map_png(map));
}

AttributionMap load_map_png(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw IoError("cannot read attribution map: " + path.string());
  const double scale = m.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0;
  cv::Mat f;
  m.convertTo(f, CV_64FC1, scale);
  RawMap out(f.rows, f.cols, 0.0);
  for (int r = 0; r < f.rows; ++r) {
    for (int c = 0; c < f.cols; ++c) out.at(r, c) = std::clamp(f.at<double>(r, c), 0.0, 1.0);
  }
  return AttributionMap::from_normalized(std::move(out));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

}  // namespace detxai
