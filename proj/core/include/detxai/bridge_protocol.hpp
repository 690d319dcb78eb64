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

// Wire format shared by BridgeDetector and bridge servers.
//
// Framing: every message is a 4-byte big-endian unsigned length followed by
// that many bytes of UTF-8 JSON.
//
// Requests:
//   {"v":1,"kind":"detect","image_png_b64":"..."}
//   {"v":1,"kind":"introspect","image_png_b64":"...","layer":"...","target_index":i}
// Replies:
//   {"v":1,"detections":[{"box":[x1,y1,x2,y2],"class":c,"score":s}, ...]}
//   {"v":1,"target_index":i,"target_value":y,
//    "activations":{"shape":[K,U,V],"data":[...]},
//    "gradients":{"shape":[K,U,V],"data":[...]}}
//   {"v":1,"error":"message","code":"capability"|"bad_request"|"internal"}
// Box coordinates and scores are rounded to 6 fractional digits. Images are
// 16-bit RGB PNG. target_index refers to the server's unfiltered detection
// list for the same image.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "detxai/detector.hpp"

namespace detxai::bridge {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxFrameBytes = 512u << 20;

// Blocking framed I/O on a file descriptor. read_frame returns nullopt on a
// clean EOF before the first byte; any other short read throws AdapterError.
void write_frame(int fd, const std::string& payload);
std::optional<std::string> read_frame(int fd);

nlohmann::json detection_to_json(const Detection& d);
Detection detection_from_json(const nlohmann::json& j);
nlohmann::json detections_to_json(const DetectionSet& set);
DetectionSet detections_from_json(const nlohmann::json& j, std::string image_id = "");

nlohmann::json tensor_to_json(const FeatureTensor& t);
FeatureTensor tensor_from_json(const nlohmann::json& j);

nlohmann::json make_detect_request(const ImageBuffer& image);
nlohmann::json make_introspect_request(const ImageBuffer& image, std::string_view layer,
                                       std::size_t target_index);
nlohmann::json make_error(std::string_view message, std::string_view code);

// Throws the matching exception when `reply` is an error object.
void raise_if_error(const nlohmann::json& reply);

// Handles one request against `detector`. Never throws; failures become
// error replies.
nlohmann::json handle_request(Detector& detector, const nlohmann::json& request,
                              bool detect_only);

// Request loop until EOF on in_fd.
void serve(Detector& detector, int in_fd, int out_fd, bool detect_only);

}  // namespace detxai::bridge
