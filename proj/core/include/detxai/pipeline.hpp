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

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "detxai/config.hpp"
#include "detxai/dataset.hpp"
#include "detxai/metrics.hpp"
#include "detxai/triage.hpp"

namespace detxai {

std::string_view tool_version();

enum class LogLevel { kInfo, kWarning, kError };
using LogSink = std::function<void(LogLevel, const std::string&)>;

// Writes "[level] message" lines to stderr.
LogSink stderr_log();

// Output placement; not part of the hashed configuration.
struct RunOptions {
  std::filesystem::path output_dir = "runs";
  std::string run_id = "run";
  int workers = 1;
  LogSink log;
};

// {run_id}/{images,maps,overlays,reports}
struct RunLayout {
  std::filesystem::path root;

  explicit RunLayout(const RunOptions& options) : root(options.output_dir / options.run_id) {}
  std::filesystem::path images() const { return root / "images"; }
  std::filesystem::path maps() const { return root / "maps"; }
  std::filesystem::path overlays() const { return root / "overlays"; }
  std::filesystem::path reports() const { return root / "reports"; }

  std::filesystem::path detections(const std::string& id) const;
  std::filesystem::path segments_png(const std::string& id) const;
  std::filesystem::path segments_json(const std::string& id) const;
  // method is a CAM method name or "lime"; index selects a per-detection map.
  std::filesystem::path map(const std::string& id, std::string_view method) const;
  std::filesystem::path detection_map(const std::string& id, std::string_view method,
                                      std::size_t index) const;
  std::filesystem::path lime_json(const std::string& id) const;
  std::filesystem::path overlay(const std::string& id, std::string_view method) const;
  std::filesystem::path perturbation(const std::string& id) const;
  std::filesystem::path manifest() const { return reports() / "manifest.json"; }
  std::filesystem::path config() const { return reports() / "config.json"; }
  std::filesystem::path dataset() const { return reports() / "dataset.json"; }
  std::filesystem::path metrics() const { return reports() / "metrics.json"; }
  std::filesystem::path metrics_csv() const { return reports() / "metrics.csv"; }
  std::filesystem::path triage() const { return reports() / "triage.json"; }
  std::filesystem::path summary() const { return reports() / "summary.md"; }
};

// Runs fn(index, worker) for every index on up to `workers` threads. Every
// index runs even when some throw; the first exception is rethrown at the end.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t, int)>& fn);

SegmentMap segment_image(const ImageBuffer& image, const RunConfig& config);

struct ImageStatus {
  std::string id;
  bool ok = false;
  std::vector<std::string> warnings;
  std::string error;
};

struct StageSummary {
  std::string stage;
  std::vector<ImageStatus> images;  // dataset order
  std::size_t successes() const;
  std::size_t failures() const;
};

// Detections, CAM maps (when the backend can introspect), segmentation,
// LIME map and overlays per image, plus the manifest. Throws only when every
// image fails.
StageSummary run_explain(const Dataset& dataset, const RunConfig& config, const RunOptions& options);

// Greedy deletion for every detection and configured op. Needs the
// detections written by run_explain.
StageSummary run_perturb(const Dataset& dataset, const RunConfig& config, const RunOptions& options);

// Builds the triage report from stored detections and maps.
TriageReport run_triage(const Dataset& dataset, const RunConfig& config, const RunOptions& options);

struct EvaluationResult {
  MetricsReport metrics;
  TriageReport triage;
  std::vector<std::string> problems;  // invariant violations; empty when healthy
  bool ok() const { return problems.empty(); }
};

// Metrics (JSON + CSV) and triage from stored artifacts.
EvaluationResult run_evaluate(const Dataset& dataset, const RunConfig& config, const RunOptions& options);

// Markdown digest of metrics.json and triage.json; also written to summary.md.
std::string run_report(const RunOptions& options);

}  // namespace detxai
