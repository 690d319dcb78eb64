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
#include "detxai/bridge_protocol.hpp"

#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>

#include "detxai/encoding.hpp"
#include "detxai/errors.hpp"
#include "detxai/image_io.hpp"

namespace detxai::bridge {
namespace {

using nlohmann::json;

void write_all(int fd, const char* data, std::size_t n) {
  while (n > 0) {
    ssize_t k = ::send(fd, data, n, MSG_NOSIGNAL);
    if (k < 0 && errno == ENOTSOCK) k = ::write(fd, data, n);
    if (k < 0) {
      if (errno == EINTR) continue;
      throw AdapterError(std::string("bridge write failed: ") + std::strerror(errno));
    }
    data += k;
    n -= static_cast<std::size_t>(k);
  }
}

// Returns bytes read; stops early only at EOF.
std::size_t read_all(int fd, char* data, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t k = ::read(fd, data + got, n - got);
    if (k < 0) {
      if (errno == EINTR) continue;
      throw AdapterError(std::string("bridge read failed: ") + std::strerror(errno));
    }
    if (k == 0) break;
    got += static_cast<std::size_t>(k);
  }
  return got;
}

std::string image_b64(const ImageBuffer& image) { return base64_encode(encode_png(image, 16)); }

}  // namespace

void write_frame(int fd, const std::string& payload) {
  if (payload.size() > kMaxFrameBytes) throw AdapterError("bridge frame too large");
  const auto n = static_cast<std::uint32_t>(payload.size());
  const std::array<char, 4> header{static_cast<char>((n >> 24) & 0xFF),
                                   static_cast<char>((n >> 16) & 0xFF),
                                   static_cast<char>((n >> 8) & 0xFF), static_cast<char>(n & 0xFF)};
  write_all(fd, header.data(), header.size());
  write_all(fd, payload.data(), payload.size());
}

std::optional<std::string> read_frame(int fd) {
  std::array<unsigned char, 4> header{};
  const std::size_t got = read_all(fd, reinterpret_cast<char*>(header.data()), header.size());
  if (got == 0) return std::nullopt;
  if (got < header.size()) throw AdapterError("bridge closed mid-frame");
  const std::uint32_t n = (std::uint32_t{header[0]} << 24) | (std::uint32_t{header[1]} << 16) |
                          (std::uint32_t{header[2]} << 8) | std::uint32_t{header[3]};
  if (n > kMaxFrameBytes) throw AdapterError("bridge frame length exceeds limit");
  std::string payload(n, '\0');
  if (read_all(fd, payload.data(), n) < n) throw AdapterError("bridge closed mid-frame");
  return payload;
}

json detection_to_json(const Detection& d) {
  return {{"box", {round6(d.box.x_min()), round6(d.box.y_min()), round6(d.box.x_max()),
                   round6(d.box.y_max())}},
          {"class", d.class_id},
          {"score", round6(d.score)}};
}

Detection detection_from_json(const json& j) {
  const auto& b = j.at("box");
  if (!b.is_array() || b.size() != 4) throw AdapterError("detection box must have 4 numbers");
  return Detection(Box(b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                       b[3].get<double>()),
                   j.at("class").get<int>(), j.at("score").get<double>());
}

json detections_to_json(const DetectionSet& set) {
  json arr = json::array();
  for (const auto& d : set) arr.push_back(detection_to_json(d));
  return arr;
}

DetectionSet detections_from_json(const json& j, std::string image_id) {
  std::vector<Detection> dets;
  for (const auto& d : j) dets.push_back(detection_from_json(d));
  return DetectionSet(std::move(image_id), std::move(dets));
}

json tensor_to_json(const FeatureTensor& t) {
  return {{"shape", {t.channels(), t.height(), t.width()}},
          {"data", std::vector<double>(t.values().begin(), t.values().end())}};
}

FeatureTensor tensor_from_json(const json& j) {
  const auto& s = j.at("shape");
  if (!s.is_array() || s.size() != 3) throw AdapterError("tensor shape must be [K,U,V]");
  return FeatureTensor(s[0].get<int>(), s[1].get<int>(), s[2].get<int>(),
                       j.at("data").get<std::vector<double>>());
}

json make_detect_request(const ImageBuffer& image) {
  return {{"v", kProtocolVersion}, {"kind", "detect"}, {"image_png_b64", image_b64(image)}};
}

json make_introspect_request(const ImageBuffer& image, std::string_view layer,
                             std::size_t target_index) {
  return {{"v", kProtocolVersion},
          {"kind", "introspect"},
          {"image_png_b64", image_b64(image)},
          {"layer", std::string(layer)},
          {"target_index", target_index}};
}

json make_error(std::string_view message, std::string_view code) {
  return {{"v", kProtocolVersion}, {"error", std::string(message)}, {"code", std::string(code)}};
}

void raise_if_error(const json& reply) {
  if (!reply.is_object()) throw AdapterError("bridge reply is not a JSON object");
  if (!reply.contains("error")) return;
  const std::string message = reply.at("error").is_string() ? reply.at("error").get<std::string>()
                                                            : reply.at("error").dump();
  const std::string code = reply.value("code", "");
  if (code == "capability") throw CapabilityError("bridge: " + message);
  throw AdapterError("bridge: " + message);
}

json handle_request(Detector& detector, const json& request, bool detect_only) {
  try {
    if (!request.is_object()) return make_error("request must be a JSON object", "bad_request");
    if (request.value("v", 0) != kProtocolVersion) {
      return make_error("unsupported protocol version", "bad_request");
    }
    const std::string kind = request.value("kind", "");
    if (kind != "detect" && kind != "introspect") {
      return make_error("unknown request kind '" + kind + "'", "bad_request");
    }
    const auto bytes = base64_decode(request.at("image_png_b64").get<std::string>());
    const ImageBuffer image = decode_png(bytes);
    if (kind == "detect") {
      return {{"v", kProtocolVersion}, {"detections", detections_to_json(detector.detect_one(image))}};
    }
    if (detect_only || !detector.supports_introspection()) {
      return make_error("introspection not supported by this bridge", "capability");
    }
    const DetectionSet dets = detector.detect_one(image);
    const auto index = request.at("target_index").get<std::size_t>();
    if (index >= dets.size()) return make_error("target_index out of range", "bad_request");
    const IntrospectionResult r =
        detector.introspect(image, dets[index], request.value("layer", std::string()));
    return {{"v", kProtocolVersion},
            {"target_index", index},
            {"target_value", r.target_value},
            {"activations", tensor_to_json(r.activations)},
            {"gradients", tensor_to_json(r.gradients)}};
  } catch (const CapabilityError& e) {
    return make_error(e.what(), "capability");
  } catch (const json::exception& e) {
    return make_error(e.what(), "bad_request");
  } catch (const std::exception& e) {
    return make_error(e.what(), "internal");
  }
}

void serve(Detector& detector, int in_fd, int out_fd, bool detect_only) {
  while (auto frame = read_frame(in_fd)) {
    json reply;
    try {
      reply = handle_request(detector, json::parse(*frame), detect_only);
    } catch (const json::parse_error& e) {
      reply = make_error(std::string("malformed JSON: ") + e.what(), "bad_request");
    }
    write_frame(out_fd, reply.dump());
  }
}

}  // namespace detxai::bridge
