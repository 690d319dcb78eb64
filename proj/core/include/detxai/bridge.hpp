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

#include <string>
#include <sys/types.h>

#include <nlohmann/json.hpp>

#include "detxai/detector.hpp"

namespace detxai {

// Detector backed by a child process speaking the bridge protocol over its
// standard input and output. One request is in flight at a time.
class BridgeDetector final : public Detector {
 public:
  // `command` runs under /bin/sh -c.
  BridgeDetector(std::string command, DetectorConfig config = {});
  ~BridgeDetector() override;

  std::string name() const override { return "bridge"; }
  // Probed lazily: the first introspect call decides.
  bool supports_introspection() const override { return introspection_ != Capability::kNo; }

  IntrospectionResult introspect(const ImageBuffer& image, const Detection& target,
                                 std::string_view layer) override;

 protected:
  std::vector<DetectionSet> run_detect(std::span<const ImageBuffer> images) override;

 private:
  enum class Capability { kUnknown, kYes, kNo };

  nlohmann::json round_trip(const nlohmann::json& request);
  DetectionSet remote_detect(const ImageBuffer& image);
  void shutdown();

  std::string command_;
  pid_t child_ = -1;
  int fd_ = -1;
  Capability introspection_ = Capability::kUnknown;
};

}  // namespace detxai
