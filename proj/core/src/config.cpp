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
#include "detxai/config.hpp"

#include <cstdlib>
#include <initializer_list>
#include <set>

#include "detxai/bridge.hpp"
#include "detxai/encoding.hpp"
#include "detxai/errors.hpp"
#include "detxai/image_io.hpp"
#include "detxai/tiny_cnn.hpp"

namespace detxai {

using nlohmann::json;

namespace {

// Rejects misspelled keys; a silently ignored knob would break audits.
void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw InvalidArgument(where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.contains(key)) throw InvalidArgument("unknown key '" + key + "' in " + where);
  }
}

json toy_to_json(const ToyDetectorParams& p) {
  return {{"contrast_threshold", p.contrast_threshold},
          {"contrast_max", p.contrast_max},
          {"min_area", p.min_area},
          {"candidate_fraction", p.candidate_fraction},
          {"void_level", p.void_level},
          {"surround_px", p.surround_px},
          {"class_id", p.class_id}};
}

ToyDetectorParams toy_from_json(const json& j) {
  check_keys(j, {"contrast_threshold", "contrast_max", "min_area", "candidate_fraction", "void_level",
                 "surround_px", "class_id"},
             "detector.toy");
  ToyDetectorParams p;
  p.contrast_threshold = j.value("contrast_threshold", p.contrast_threshold);
  p.contrast_max = j.value("contrast_max", p.contrast_max);
  p.min_area = j.value("min_area", p.min_area);
  p.candidate_fraction = j.value("candidate_fraction", p.candidate_fraction);
  p.void_level = j.value("void_level", p.void_level);
  p.surround_px = j.value("surround_px", p.surround_px);
  p.class_id = j.value("class_id", p.class_id);
  return p;
}

}  // namespace

std::string to_string(Backend b) {
  switch (b) {
    case Backend::kToy: return "toy";
    case Backend::kTinyCnn: return "tinycnn";
    case Backend::kBridge: return "bridge";
  }
  return "toy";
}

Backend backend_from_string(std::string_view s) {
  if (s == "toy") return Backend::kToy;
  if (s == "tinycnn") return Backend::kTinyCnn;
  if (s == "bridge") return Backend::kBridge;
  throw InvalidArgument("unknown detector backend: " + std::string(s));
}

void RunConfig::validate() const {
  detector.validate();
  toy.validate();
  if (backend == Backend::kBridge && bridge_command.empty() && !std::getenv(kBridgeCommandEnv)) {
    throw InvalidArgument(std::string("bridge backend needs a command (config or ") + kBridgeCommandEnv + ")");
  }
  if (cam_enabled && cam_methods.empty()) throw InvalidArgument("cam enabled without methods");
  slic.validate();
  if (!(min_area_fraction >= 0.0) || !(black_lightness_threshold >= 0.0)) {
    throw InvalidArgument("segment filter thresholds must be >= 0");
  }
  if (!(lime.n_samples >= 2)) throw InvalidArgument("lime n_samples must be >= 2");
  for (const auto& op : effective_ops()) op.validate();
  search.validate();
  fidelity.validate();
  triage.validate();
  if (triage_map != "lime" && triage_map != "none") cam_method_from_string(triage_map);
}

std::vector<PerturbationOp> RunConfig::effective_ops() const {
  if (!ops.empty()) return ops;
  std::vector<PerturbationOp> out;
  for (auto k : {PerturbationKind::kMaskBlack, PerturbationKind::kMaskMean, PerturbationKind::kNoise,
                 PerturbationKind::kBlur}) {
    PerturbationOp op;
    op.kind = k;
    out.push_back(op);
  }
  return out;
}

json RunConfig::to_json() const {
  json methods = json::array();
  for (auto m : cam_methods) methods.push_back(to_string(m));
  json op_list = json::array();
  for (const auto& op : effective_ops()) op_list.push_back(perturbation_op_to_json(op));
  json lime_json = lime_params_to_json(lime);
  lime_json["enabled"] = lime_enabled;
  return {{"schema", "detxai.run_config"},
          {"version", 1},
          {"seed", seed},
          {"detector",
           {{"backend", to_string(backend)},
            {"bridge_command", bridge_command},
            {"score_threshold", detector.score_threshold},
            {"layer", detector.layer_name},
            {"batch_limit", detector.batch_limit},
            {"toy", toy_to_json(toy)}}},
          {"cam", {{"enabled", cam_enabled}, {"methods", methods}, {"aggregation", to_string(aggregation)}}},
          {"lime", lime_json},
          {"segmentation",
           {{"n_segments", slic.n_segments},
            {"compactness", slic.compactness},
            {"smoothing_sigma", slic.smoothing_sigma},
            {"max_iterations", slic.max_iterations},
            {"min_area_fraction", min_area_fraction},
            {"black_lightness_threshold", black_lightness_threshold}}},
          {"perturbation", {{"ops", op_list}, {"search", search_config_to_json(search)}}},
          {"metrics", {{"theta", fidelity.attribution_threshold}}},
          {"triage", {{"iou", triage.iou}, {"score", triage.score}, {"map", triage_map}}}};
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  try {
    check_keys(j, {"schema", "version", "seed", "detector", "cam", "lime", "segmentation", "perturbation",
                   "metrics", "triage"},
               "config");
    if (j.contains("schema") && j.at("schema") != "detxai.run_config") {
      throw InvalidArgument("not a run config");
    }
    if (j.contains("version") && j.at("version") != 1) throw InvalidArgument("unsupported config version");
    c.seed = j.value("seed", c.seed);
    if (j.contains("detector")) {
      const auto& d = j.at("detector");
      check_keys(d, {"backend", "bridge_command", "score_threshold", "layer", "batch_limit", "toy"}, "detector");
      c.backend = backend_from_string(d.value("backend", to_string(c.backend)));
      c.bridge_command = d.value("bridge_command", c.bridge_command);
      c.detector.score_threshold = d.value("score_threshold", c.detector.score_threshold);
      c.detector.layer_name = d.value("layer", c.detector.layer_name);
      c.detector.batch_limit = d.value("batch_limit", c.detector.batch_limit);
      if (d.contains("toy")) c.toy = toy_from_json(d.at("toy"));
    }
    if (j.contains("cam")) {
      const auto& cam = j.at("cam");
      check_keys(cam, {"enabled", "methods", "aggregation"}, "cam");
      c.cam_enabled = cam.value("enabled", c.cam_enabled);
      if (cam.contains("methods")) {
        c.cam_methods.clear();
        for (const auto& m : cam.at("methods")) c.cam_methods.push_back(cam_method_from_string(m.get<std::string>()));
      }
      c.aggregation = aggregation_from_string(cam.value("aggregation", to_string(c.aggregation)));
    }
    if (j.contains("lime")) {
      const auto& l = j.at("lime");
      check_keys(l, {"enabled", "n_samples", "keep_probability", "kernel_width", "ridge", "fill",
                     "iou_match_threshold", "weight_mode", "proximity_scale", "seed"},
                 "lime");
      c.lime_enabled = l.value("enabled", c.lime_enabled);
      c.lime = lime_params_from_json(l);
    }
    if (j.contains("segmentation")) {
      const auto& s = j.at("segmentation");
      check_keys(s, {"n_segments", "compactness", "smoothing_sigma", "max_iterations", "min_area_fraction",
                     "black_lightness_threshold"},
                 "segmentation");
      c.slic.n_segments = s.value("n_segments", c.slic.n_segments);
      c.slic.compactness = s.value("compactness", c.slic.compactness);
      c.slic.smoothing_sigma = s.value("smoothing_sigma", c.slic.smoothing_sigma);
      c.slic.max_iterations = s.value("max_iterations", c.slic.max_iterations);
      c.min_area_fraction = s.value("min_area_fraction", c.min_area_fraction);
      c.black_lightness_threshold = s.value("black_lightness_threshold", c.black_lightness_threshold);
    }
    if (j.contains("perturbation")) {
      const auto& p = j.at("perturbation");
      check_keys(p, {"ops", "search"}, "perturbation");
      if (p.contains("ops")) {
        for (const auto& op : p.at("ops")) c.ops.push_back(perturbation_op_from_json(op));
      }
      if (p.contains("search")) c.search = search_config_from_json(p.at("search"));
    }
    if (j.contains("metrics")) {
      check_keys(j.at("metrics"), {"theta"}, "metrics");
      c.fidelity.attribution_threshold = j.at("metrics").value("theta", c.fidelity.attribution_threshold);
    }
    if (j.contains("triage")) {
      const auto& t = j.at("triage");
      check_keys(t, {"iou", "score", "map"}, "triage");
      c.triage.iou = t.value("iou", c.triage.iou);
      c.triage.score = t.value("score", c.triage.score);
      c.triage_map = t.value("map", c.triage_map);
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed run config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string RunConfig::hash() const { return sha256_hex(to_json().dump()); }

RunConfig load_run_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw InvalidArgument("cannot parse config " + path.string() + ": " + e.what());
  }
  return RunConfig::from_json(j);
}

std::unique_ptr<Detector> make_detector(const RunConfig& config) {
  switch (config.backend) {
    case Backend::kToy:
      return std::make_unique<ToyDetector>(config.detector, config.toy);
    case Backend::kTinyCnn:
      return std::make_unique<TinyCnnDetector>(config.detector);
    case Backend::kBridge: {
      const char* env = std::getenv(kBridgeCommandEnv);
      std::string command = env && *env ? env : config.bridge_command;
      if (command.empty()) throw InvalidArgument("no bridge command configured");
      return std::make_unique<BridgeDetector>(std::move(command), config.detector);
    }
  }
  throw InvalidArgument("unknown backend");
}

std::uint64_t derive_seed(std::uint64_t seed, const std::string& image_id, std::string_view purpose) {
  const auto hex = sha256_hex(std::to_string(seed) + "/" + image_id + "/" + std::string(purpose));
  return std::stoull(hex.substr(0, 16), nullptr, 16);
}

}  // namespace detxai
