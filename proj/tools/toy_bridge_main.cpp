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
// Bridge server over stdin/stdout backed by one of the built-in detectors.
// Used to exercise the out-of-process adapter without a real model.

#include <unistd.h>

#include <iostream>

#include <CLI11.hpp>

#include "detxai/bridge_protocol.hpp"
#include "detxai/tiny_cnn.hpp"
#include "detxai/toy_detector.hpp"

int main(int argc, char** argv) {
  CLI::App app{"detxai bridge server backed by a built-in detector"};
  std::string backend = "toy";
  bool detect_only = false;
  double score_threshold = 0.0;
  app.add_option("--backend", backend, "toy or tinycnn")->check(CLI::IsMember({"toy", "tinycnn"}));
  app.add_flag("--detect-only", detect_only, "refuse introspection requests");
  app.add_option("--score-threshold", score_threshold, "server-side score cut")->check(CLI::Range(0.0, 0.999));
  CLI11_PARSE(app, argc, argv);

  try {
    detxai::DetectorConfig config;
    config.score_threshold = score_threshold;
    std::unique_ptr<detxai::Detector> detector;
    if (backend == "toy") {
      detector = std::make_unique<detxai::ToyDetector>(config);
    } else {
      detector = std::make_unique<detxai::TinyCnnDetector>(config);
    }
    detxai::bridge::serve(*detector, STDIN_FILENO, STDOUT_FILENO, detect_only);
  } catch (const std::exception& e) {
    std::cerr << "detxai-toy-bridge: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
