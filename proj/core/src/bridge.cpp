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
#include "detxai/bridge.hpp"

#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <thread>

#include "detxai/bridge_protocol.hpp"
#include "detxai/errors.hpp"

namespace detxai {

using nlohmann::json;

BridgeDetector::BridgeDetector(std::string command, DetectorConfig config)
    : Detector(std::move(config)), command_(std::move(command)) {
  if (command_.empty()) throw InvalidArgument("bridge command is empty");
  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw AdapterError(std::string("socketpair failed: ") + std::strerror(errno));
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(sv[0]);
    ::close(sv[1]);
    throw AdapterError(std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    // Child: the socket becomes both stdin and stdout; stderr is inherited.
    ::dup2(sv[1], STDIN_FILENO);
    ::dup2(sv[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(sv[1]);
  child_ = pid;
  fd_ = sv[0];
}

BridgeDetector::~BridgeDetector() { shutdown(); }

void BridgeDetector::shutdown() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
  if (child_ > 0) {
    using namespace std::chrono_literals;
    for (int i = 0; i < 200; ++i) {
      if (::waitpid(child_, nullptr, WNOHANG) != 0) {
        child_ = -1;
        return;
      }
      std::this_thread::sleep_for(10ms);
    }
    ::kill(child_, SIGKILL);
    ::waitpid(child_, nullptr, 0);
    child_ = -1;
  }
}

json BridgeDetector::round_trip(const json& request) {
  if (fd_ < 0) throw AdapterError("bridge connection is closed");
  try {
    bridge::write_frame(fd_, request.dump());
    auto frame = bridge::read_frame(fd_);
    if (!frame) throw AdapterError("bridge process closed the connection");
    json reply = json::parse(*frame);
    if (!reply.is_object()) throw AdapterError("bridge reply is not a JSON object");
    return reply;
  } catch (const json::exception& e) {
    shutdown();
    throw AdapterError(std::string("malformed bridge reply: ") + e.what());
  } catch (const AdapterError&) {
    shutdown();
    throw;
  }
}

DetectionSet BridgeDetector::remote_detect(const ImageBuffer& image) {
  json reply = round_trip(bridge::make_detect_request(image));
  bridge::raise_if_error(reply);
  if (!reply.contains("detections") || !reply.at("detections").is_array()) {
    throw AdapterError("bridge reply lacks a detections array");
  }
  try {
    return bridge::detections_from_json(reply.at("detections"));
  } catch (const json::exception& e) {
    throw AdapterError(std::string("malformed detection in bridge reply: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw AdapterError(std::string("invalid detection in bridge reply: ") + e.what());
  }
}

std::vector<DetectionSet> BridgeDetector::run_detect(std::span<const ImageBuffer> images) {
  std::vector<DetectionSet> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(remote_detect(img));
  return out;
}

IntrospectionResult BridgeDetector::introspect(const ImageBuffer& image, const Detection& target,
                                               std::string_view layer) {
  if (introspection_ == Capability::kNo) {
    throw CapabilityError("bridge does not expose activations or gradients");
  }
  const DetectionSet dets = remote_detect(image);
  std::optional<std::size_t> index;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].box == target.box && dets[i].class_id == target.class_id) {
      index = i;
      break;
    }
  }
  if (!index) index = match_index(target, dets, 0.5);
  if (!index) throw InvalidArgument("introspection target not reproduced by the bridge");

  json reply = round_trip(bridge::make_introspect_request(image, layer, *index));
  try {
    bridge::raise_if_error(reply);
  } catch (const CapabilityError&) {
    introspection_ = Capability::kNo;
    throw;
  }
  introspection_ = Capability::kYes;
  try {
    IntrospectionResult r;
    r.activations = bridge::tensor_from_json(reply.at("activations"));
    r.gradients = bridge::tensor_from_json(reply.at("gradients"));
    r.target_detection_index = reply.at("target_index").get<std::size_t>();
    r.target_value = reply.at("target_value").get<double>();
    if (!r.activations.same_shape(r.gradients)) {
      throw AdapterError("bridge returned activations and gradients of different shapes");
    }
    for (double g : r.gradients.values()) {
      if (!std::isfinite(g)) throw AdapterError("bridge returned non-finite gradients");
    }
    return r;
  } catch (const json::exception& e) {
    throw AdapterError(std::string("malformed introspection reply: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw AdapterError(std::string("invalid introspection reply: ") + e.what());
  }
}

}  // namespace detxai
