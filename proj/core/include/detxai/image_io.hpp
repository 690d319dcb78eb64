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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "detxai/image.hpp"

namespace detxai {

// PNG encoding of an RGB image; bit_depth is 8 or 16.
std::vector<std::uint8_t> encode_png(const ImageBuffer& image, int bit_depth = 8);
ImageBuffer decode_png(std::span<const std::uint8_t> bytes);

// Any format OpenCV can read; 8- and 16-bit, grayscale or color.
ImageBuffer load_image(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const ImageBuffer& image, int bit_depth = 8);

// Attribution maps round-trip through 16-bit grayscale PNG (quantized to 1/65535).
std::vector<std::uint8_t> encode_map_png(const AttributionMap& map);
void save_map_png(const std::filesystem::path& path, const AttributionMap& map);
AttributionMap load_map_png(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace detxai
