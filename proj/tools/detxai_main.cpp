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
// detxai command-line front end.
//
//   detxai ingest   --annotations a.json ... --images DIR --out dataset.json
//   detxai explain  --dataset dataset.json [--config run.json] --out runs --run-id r1
//   detxai perturb  --out runs --run-id r1
//   detxai evaluate --out runs --run-id r1
//   detxai triage   --out runs --run-id r1
//   detxai report   --out runs --run-id r1
//
// Stages after explain default to the config and dataset copies stored in
// the run directory. Exit codes: 0 success, 1 invariant failure, 2 error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "detxai/config.hpp"
#include "detxai/dataset.hpp"
#include "detxai/errors.hpp"
#include "detxai/image_io.hpp"
#include "detxai/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunFlags {
  std::optional<fs::path> dataset;
  std::optional<fs::path> config;
  fs::path out = "runs";
  std::string run_id = "run";
  int workers = 1;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend;
  std::optional<std::string> bridge_command;
  std::optional<std::string> layer;
  std::vector<std::string> cam_methods;
  bool no_cam = false;
  bool no_lime = false;
  std::optional<int> lime_samples;
  std::optional<std::string> weight_mode;
  std::vector<std::string> ops;
  std::optional<double> tau;
  std::optional<double> theta;
  std::optional<int> n_segments;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool overrides) {
  cmd->add_option("--dataset", f.dataset, "normalized dataset JSON (default: the run's copy)");
  cmd->add_option("--config", f.config, "run config JSON (default: the run's copy, else built-in defaults)");
  cmd->add_option("--out", f.out, "output root")->capture_default_str();
  cmd->add_option("--run-id", f.run_id, "run directory name")->capture_default_str();
  cmd->add_option("-j,--workers", f.workers, "image-level worker threads")->check(CLI::Range(1, 256));
  if (!overrides) return;
  cmd->add_option("--seed", f.seed, "override seed");
  cmd->add_option("--backend", f.backend, "toy | tinycnn | bridge")->check(CLI::IsMember({"toy", "tinycnn", "bridge"}));
  cmd->add_option("--bridge-cmd", f.bridge_command,
                  std::string("bridge command line (env ") + detxai::kBridgeCommandEnv + " wins)");
  cmd->add_option("--layer", f.layer, "feature layer for CAM");
  cmd->add_option("--cam-methods", f.cam_methods, "layercam and/or hirescam");
  cmd->add_flag("--no-cam", f.no_cam, "skip CAM");
  cmd->add_flag("--no-lime", f.no_lime, "skip LIME");
  cmd->add_option("--lime-samples", f.lime_samples, "LIME perturbation samples");
  cmd->add_option("--weight-mode", f.weight_mode, "confidence | area | uniform");
  cmd->add_option("--ops", f.ops, "perturbation kinds: mask_black mask_mean noise blur");
  cmd->add_option("--tau", f.tau, "flip threshold");
  cmd->add_option("--theta", f.theta, "attribution threshold");
  cmd->add_option("--segments", f.n_segments, "SLIC target segment count");
}

detxai::RunOptions run_options(const RunFlags& f) {
  detxai::RunOptions o;
  o.output_dir = f.out;
  o.run_id = f.run_id;
  o.workers = f.workers;
  o.log = detxai::stderr_log();
  return o;
}

detxai::RunConfig resolve_config(const RunFlags& f, const detxai::RunLayout& layout) {
  json j = json::object();
  if (f.config) {
    j = json::parse(detxai::read_text_file(*f.config));
  } else if (fs::exists(layout.config())) {
    j = json::parse(detxai::read_text_file(layout.config()));
  }
  if (f.seed) j["seed"] = *f.seed;
  if (f.backend) j["detector"]["backend"] = *f.backend;
  if (f.bridge_command) j["detector"]["bridge_command"] = *f.bridge_command;
  if (f.layer) j["detector"]["layer"] = *f.layer;
  if (!f.cam_methods.empty()) j["cam"]["methods"] = f.cam_methods;
  if (f.no_cam) j["cam"]["enabled"] = false;
  if (f.no_lime) j["lime"]["enabled"] = false;
  if (f.lime_samples) j["lime"]["n_samples"] = *f.lime_samples;
  if (f.weight_mode) j["lime"]["weight_mode"] = *f.weight_mode;
  if (!f.ops.empty()) j["perturbation"]["ops"] = f.ops;
  if (f.tau) j["perturbation"]["search"]["tau"] = *f.tau;
  if (f.theta) j["metrics"]["theta"] = *f.theta;
  if (f.n_segments) j["segmentation"]["n_segments"] = *f.n_segments;
  return detxai::RunConfig::from_json(j);
}

detxai::Dataset resolve_dataset(const RunFlags& f, const detxai::RunLayout& layout) {
  if (f.dataset) return detxai::load_dataset(*f.dataset);
  if (fs::exists(layout.dataset())) return detxai::load_dataset(layout.dataset());
  throw detxai::InvalidArgument("no dataset given and none stored in " + layout.root.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"detxai: post-hoc explanations and audits for object detectors"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(detxai::tool_version()));

  std::vector<fs::path> annotation_files;
  fs::path image_dir;
  fs::path dataset_out = "dataset.json";
  std::optional<fs::path> report_out;
  std::string split = "test";
  auto* ingest = app.add_subcommand("ingest", "normalize Labelme/COCO annotations into a dataset");
  ingest->add_option("-a,--annotations", annotation_files, "annotation files")->required()->check(CLI::ExistingFile);
  ingest->add_option("-i,--images", image_dir, "image directory")->required()->check(CLI::ExistingDirectory);
  ingest->add_option("-o,--out", dataset_out, "dataset JSON to write")->capture_default_str();
  ingest->add_option("--report", report_out, "validation report JSON (default: <out>.report.json)");
  ingest->add_option("--split", split, "split tag")->capture_default_str();

  RunFlags explain_flags, perturb_flags, evaluate_flags, triage_flags, report_flags;
  auto* explain = app.add_subcommand("explain", "detections, CAM and LIME maps, overlays");
  add_run_flags(explain, explain_flags, true);
  auto* perturb = app.add_subcommand("perturb", "greedy deletion search per detection and op");
  add_run_flags(perturb, perturb_flags, true);
  auto* evaluate = app.add_subcommand("evaluate", "metrics report and triage; exit 1 on invariant failure");
  add_run_flags(evaluate, evaluate_flags, true);
  auto* triage = app.add_subcommand("triage", "false-positive report with overlays");
  add_run_flags(triage, triage_flags, true);
  auto* report = app.add_subcommand("report", "markdown digest of the run's reports");
  report->add_option("--out", report_flags.out, "output root")->capture_default_str();
  report->add_option("--run-id", report_flags.run_id, "run directory name")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      const auto result = detxai::ingest(annotation_files, image_dir, split);
      detxai::save_dataset(result.dataset, dataset_out);
      const fs::path rep = report_out ? *report_out : fs::path(dataset_out.string() + ".report.json");
      detxai::write_text_file(rep, result.report_json().dump(2) + "\n");
      std::size_t problems = 0;
      for (const auto& e : result.report) {
        if (e.status != "ok") {
          ++problems;
          std::cerr << "[" << e.status << "] " << e.source << " " << e.item << ": " << e.message << "\n";
        }
      }
      std::cout << result.dataset.images.size() << " images, " << result.dataset.annotation_count()
                << " annotations, " << problems << " report entries need attention\n";
      return 0;
    }
    if (*report) {
      std::cout << detxai::run_report(run_options(report_flags));
      return 0;
    }

    auto stage = [&](RunFlags& f, auto&& fn) {
      const auto options = run_options(f);
      const detxai::RunLayout layout(options);
      const auto config = resolve_config(f, layout);
      const auto dataset = resolve_dataset(f, layout);
      return fn(dataset, config, options);
    };
    if (*explain) {
      const auto s = stage(explain_flags, detxai::run_explain);
      std::cout << "explain: " << s.successes() << " ok, " << s.failures() << " failed\n";
      return 0;
    }
    if (*perturb) {
      const auto s = stage(perturb_flags, detxai::run_perturb);
      std::cout << "perturb: " << s.successes() << " ok, " << s.failures() << " failed\n";
      return 0;
    }
    if (*triage) {
      const auto t = stage(triage_flags, detxai::run_triage);
      std::cout << "triage: " << t.items.size() << " false positives\n";
      return 0;
    }
    if (*evaluate) {
      const auto r = stage(evaluate_flags, detxai::run_evaluate);
      std::cout << "evaluate: " << r.triage.items.size() << " false positives, " << r.problems.size()
                << " invariant problems\n";
      return r.ok() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "detxai: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
