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
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "detxai/cam.hpp"
#include "detxai/detector.hpp"
#include "detxai/lime.hpp"
#include "detxai/metrics.hpp"
#include "detxai/perturb.hpp"
#include "detxai/segmentation.hpp"
#include "detxai/toy_detector.hpp"
#include "detxai/triage.hpp"

namespace detxai {

inline constexpr const char* kBridgeCommandEnv = "DETXAI_BRIDGE_CMD";

enum class Backend { kToy, kTinyCnn, kBridge };
std::string to_string(Backend b);
Backend backend_from_string(std::string_view s);

// Everything that affects numeric outputs. Output placement and worker
// count live outside so that the echo and hash only cover the science.
struct RunConfig {
  Backend backend = Backend::kToy;
  std::string bridge_command;
  DetectorConfig detector;
  ToyDetectorParams toy;

  bool cam_enabled = true;
  std::vector<CamMethod> cam_methods = {CamMethod::kLayerCam, CamMethod::kHiResCam};
  Aggregation aggregation = Aggregation::kMax;

  bool lime_enabled = true;
  LimeParams lime;
  SlicParams slic;
  double min_area_fraction = 5e-4;
  double black_lightness_threshold = 5.0;

  std::vector<PerturbationOp> ops;  // empty means all four kinds with defaults
  SearchConfig search;

  FidelityParams fidelity;
  TriageThresholds triage;
  std::string triage_map = "layercam";  // which map backs the triage overlays

  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  std::string hash() const;  // SHA-256 of the canonical JSON
  std::vector<PerturbationOp> effective_ops() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

// Builds the configured backend. The bridge command comes from the
// environment variable when it is set.
std::unique_ptr<Detector> make_detector(const RunConfig& config);

// Deterministic per-image seed so results do not depend on scheduling.
std::uint64_t derive_seed(std::uint64_t seed, const std::string& image_id, std::string_view purpose);

}  // namespace detxai
