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
#include "detxai/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "detxai/bridge_protocol.hpp"
#include "detxai/cam.hpp"
#include "detxai/encoding.hpp"
#include "detxai/errors.hpp"
#include "detxai/image_io.hpp"
#include "detxai/lime.hpp"
#include "detxai/perturb.hpp"

#ifndef DETXAI_VERSION
#define DETXAI_VERSION "0.0.0"
#endif

namespace detxai {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_json(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing artifact " + path.string());
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw IoError("cannot parse " + path.string() + ": " + e.what());
  }
}

LogSink sink_of(const RunOptions& options) { return options.log ? options.log : stderr_log(); }

std::vector<std::string> map_methods(const RunConfig& config) {
  std::vector<std::string> out;
  if (config.cam_enabled) {
    for (auto m : config.cam_methods) out.push_back(to_string(m));
  }
  if (config.lime_enabled) out.push_back("lime");
  return out;
}

json status_json(const StageSummary& summary) {
  json images = json::array();
  for (const auto& s : summary.images) {
    images.push_back({{"id", s.id},
                      {"status", s.ok ? "ok" : "failed"},
                      {"warnings", s.warnings},
                      {"error", s.error}});
  }
  return images;
}

// Each stage records its own section; the identity fields are refreshed.
void update_manifest(const RunLayout& layout, const RunOptions& options, const RunConfig& config,
                     const Dataset& dataset, const std::string& stage, json section) {
  json manifest = fs::exists(layout.manifest()) ? read_json(layout.manifest()) : json::object();
  manifest["schema"] = "detxai.manifest";
  manifest["version"] = 1;
  manifest["tool_version"] = std::string(tool_version());
  manifest["run_id"] = options.run_id;
  manifest["config_hash"] = config.hash();
  manifest.erase("dataset_hash_error");
  try {
    manifest["dataset_hash"] = dataset_hash(dataset);
  } catch (const IoError& e) {
    // Unreadable images already fail their own entries below.
    manifest["dataset_hash"] = nullptr;
    manifest["dataset_hash_error"] = e.what();
  }
  manifest["seed"] = config.seed;
  manifest["image_count"] = dataset.images.size();
  manifest["stages"][stage] = std::move(section);
  write_json(layout.manifest(), manifest);
}

StageSummary finish_stage(const std::string& stage, std::vector<ImageStatus> statuses,
                          const RunLayout& layout, const RunOptions& options, const RunConfig& config,
                          const Dataset& dataset, const std::string& started) {
  StageSummary summary{stage, std::move(statuses)};
  update_manifest(layout, options, config, dataset, stage,
                  {{"started_at", started},
                   {"finished_at", now_utc()},
                   {"workers", options.workers},
                   {"successes", summary.successes()},
                   {"failures", summary.failures()},
                   {"images", status_json(summary)}});
  if (!dataset.images.empty() && summary.successes() == 0) {
    throw Error(stage + " failed for every image");
  }
  return summary;
}

DetectionSet load_detections(const RunLayout& layout, const std::string& id) {
  const json j = read_json(layout.detections(id));
  return bridge::detections_from_json(j.at("detections"), id);
}

SegmentMap load_or_segment(const RunLayout& layout, const std::string& id, const ImageBuffer& image,
                           const RunConfig& config) {
  if (fs::exists(layout.segments_png(id)) && fs::exists(layout.segments_json(id))) {
    return load_segment_map(layout.segments_png(id), layout.segments_json(id));
  }
  return segment_image(image, config);
}

// Per-detection workers reuse one detector each.
class DetectorPool {
 public:
  DetectorPool(const RunConfig& config, int workers) : config_(config), slots_(std::max(workers, 1)) {}
  Detector& get(int worker) {
    auto& slot = slots_[static_cast<std::size_t>(worker)];
    if (!slot) slot = make_detector(config_);
    return *slot;
  }

 private:
  const RunConfig& config_;
  std::vector<std::unique_ptr<Detector>> slots_;
};

void explain_one(Detector& detector, const DatasetImage& im, const RunConfig& config,
                 const RunLayout& layout, ImageStatus& status, const LogSink& log) {
  const ImageBuffer image = load_image(im.path);
  const DetectionSet dets(im.id, detector.detect_one(image).detections());
  write_json(layout.detections(im.id), {{"image_id", im.id},
                                        {"detector", detector.name()},
                                        {"detections", bridge::detections_to_json(dets)}});
  auto warn = [&](const std::string& msg) {
    status.warnings.push_back(msg);
    log(LogLevel::kWarning, im.id + ": " + msg);
  };

  std::vector<std::pair<std::string, AttributionMap>> maps;
  if (config.cam_enabled) {
    if (!detector.supports_introspection()) {
      warn("capability: backend '" + detector.name() + "' cannot introspect; CAM skipped");
    } else if (dets.empty()) {
      warn("no detections; CAM skipped");
    } else {
      for (auto method : config.cam_methods) {
        try {
          CamRequest req{image, {}, config.detector.layer_name, method, config.aggregation};
          const CamResult res = explain_image(detector, req, dets);
          for (std::size_t k = 0; k < res.per_detection.size(); ++k) {
            save_map_png(layout.detection_map(im.id, to_string(method), k), res.per_detection[k]);
          }
          save_map_png(layout.map(im.id, to_string(method)), res.aggregated);
          maps.emplace_back(to_string(method), res.aggregated);
        } catch (const CapabilityError& e) {
          warn(std::string("capability: ") + e.what() + "; CAM skipped");
          break;
        }
      }
    }
  }

  const SegmentMap segmap = segment_image(image, config);
  save_segment_map(segmap, layout.segments_png(im.id), layout.segments_json(im.id));

  if (config.lime_enabled) {
    if (dets.empty()) {
      warn("no detections; LIME skipped");
    } else {
      LimeParams params = config.lime;
      params.seed = derive_seed(config.seed, im.id, "lime/" + std::to_string(config.lime.seed));
      try {
        const LimeExplanation lime = explain_lime(detector, image, segmap, params);
        save_map_png(layout.map(im.id, "lime"), lime.explanation.map);
        write_json(layout.lime_json(im.id), lime_explanation_to_json(lime));
        maps.emplace_back("lime", lime.explanation.map);
      } catch (const InvalidArgument& e) {
        warn(std::string("LIME skipped: ") + e.what());
      } catch (const SingularSystemError& e) {
        warn(std::string("LIME skipped: ") + e.what());
      }
    }
  }

  for (const auto& [method, map] : maps) {
    write_file_bytes(layout.overlay(im.id, method), render_overlay(image, &map, dets, im.annotations));
  }
}

void perturb_one(Detector& detector, const DatasetImage& im, const RunConfig& config,
                 const RunLayout& layout, ImageStatus& status, const LogSink& log) {
  const DetectionSet dets = load_detections(layout, im.id);
  const ImageBuffer image = load_image(im.path);
  const SegmentMap segmap = load_or_segment(layout, im.id, image, config);
  json results = json::array();
  for (std::size_t k = 0; k < dets.size(); ++k) {
    for (const auto& base : config.effective_ops()) {
      PerturbationOp op = base;
      op.noise_seed = derive_seed(config.seed, im.id, "noise/" + std::to_string(base.noise_seed));
      json entry = {{"target_index", k}, {"op", to_string(op.kind)}};
      try {
        const auto r = greedy_deletion(detector, image, dets[k], op, segmap, config.search);
        entry["completed"] = true;
        entry["result"] = perturbation_result_to_json(r);
      } catch (const DeletionAborted& e) {
        entry["completed"] = false;
        entry["error"] = e.what();
        entry["result"] = perturbation_result_to_json(e.partial());
        status.warnings.push_back("target " + std::to_string(k) + " " + to_string(op.kind) + ": " + e.what());
      } catch (const NoEligibleRegionError& e) {
        entry["completed"] = false;
        entry["error"] = e.what();
        status.warnings.push_back("target " + std::to_string(k) + " " + to_string(op.kind) + ": " + e.what());
      }
      results.push_back(std::move(entry));
    }
  }
  for (const auto& w : status.warnings) log(LogLevel::kWarning, im.id + ": " + w);
  write_json(layout.perturbation(im.id), {{"image_id", im.id}, {"results", std::move(results)}});
}

template <typename Fn>
StageSummary run_stage(const std::string& stage, const Dataset& dataset, const RunConfig& config,
                       const RunOptions& options, Fn&& per_image) {
  config.validate();
  const auto log = sink_of(options);
  const RunLayout layout(options);
  const std::string started = now_utc();
  DetectorPool pool(config, options.workers);
  std::vector<ImageStatus> statuses(dataset.images.size());
  parallel_for(dataset.images.size(), options.workers, [&](std::size_t i, int worker) {
    const auto& im = dataset.images[i];
    auto& st = statuses[i];
    st.id = im.id;
    try {
      per_image(pool.get(worker), im, config, layout, st, log);
      st.ok = true;
    } catch (const std::exception& e) {
      st.error = e.what();
      log(LogLevel::kError, im.id + ": " + e.what());
    }
  });
  auto summary = finish_stage(stage, std::move(statuses), layout, options, config, dataset, started);
  log(LogLevel::kInfo, stage + ": " + std::to_string(summary.successes()) + " ok, " +
                           std::to_string(summary.failures()) + " failed");
  return summary;
}

bool strictly_increasing(const std::vector<double>& v) {
  return std::adjacent_find(v.begin(), v.end(), [](double a, double b) { return !(a < b); }) == v.end();
}

// Sanity checks on stored perturbation results.
void check_perturbation(const PerturbationResult& r, const std::string& where,
                        std::vector<std::string>& problems) {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(r.final_confidence) || !unit(r.original_confidence) || !unit(r.area_fraction)) {
    problems.push_back(where + ": value outside [0,1]");
  }
  if (r.flipped != (r.final_confidence < r.config.tau)) problems.push_back(where + ": inconsistent flip flag");
  if (!strictly_increasing(r.area_trace)) problems.push_back(where + ": area trace not strictly increasing");
  const std::set<int> region(r.region.begin(), r.region.end());
  for (int s : r.selected_segments) {
    if (!region.contains(s)) problems.push_back(where + ": selected segment outside the eligible region");
  }
  if (r.selected_segments.size() != static_cast<std::size_t>(r.iterations)) {
    problems.push_back(where + ": iteration count differs from selection size");
  }
}

std::string pct(double v) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  out << v * 100.0 << "%";
  return out.str();
}

std::string fixed(double v, int digits) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << v;
  return out.str();
}

}  // namespace

std::string_view tool_version() { return DETXAI_VERSION; }

LogSink stderr_log() {
  static std::mutex mu;
  return [](LogLevel level, const std::string& msg) {
    const char* tag = level == LogLevel::kInfo ? "info" : level == LogLevel::kWarning ? "warning" : "error";
    std::lock_guard lock(mu);
    std::cerr << "[" << tag << "] " << msg << "\n";
  };
}

fs::path RunLayout::detections(const std::string& id) const { return images() / (id + ".detections.json"); }
fs::path RunLayout::segments_png(const std::string& id) const { return maps() / (id + ".segments.png"); }
fs::path RunLayout::segments_json(const std::string& id) const { return maps() / (id + ".segments.json"); }
fs::path RunLayout::map(const std::string& id, std::string_view method) const {
  return maps() / (id + "." + std::string(method) + ".png");
}
fs::path RunLayout::detection_map(const std::string& id, std::string_view method, std::size_t index) const {
  return maps() / (id + "." + std::string(method) + ".det" + std::to_string(index) + ".png");
}
fs::path RunLayout::lime_json(const std::string& id) const { return maps() / (id + ".lime.json"); }
fs::path RunLayout::overlay(const std::string& id, std::string_view method) const {
  return overlays() / (id + "." + std::string(method) + ".png");
}
fs::path RunLayout::perturbation(const std::string& id) const {
  return reports() / "perturbation" / (id + ".json");
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t, int)>& fn) {
  const int n = std::clamp<int>(workers, 1, static_cast<int>(std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto body = [&](int worker) {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i, worker);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  if (n == 1) {
    body(0);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < n; ++w) threads.emplace_back(body, w);
    for (auto& t : threads) t.join();
  }
  if (first) std::rethrow_exception(first);
}

SegmentMap segment_image(const ImageBuffer& image, const RunConfig& config) {
  return filter_segments(slic(to_lab(image), config.slic), config.min_area_fraction,
                         config.black_lightness_threshold);
}

std::size_t StageSummary::successes() const {
  return static_cast<std::size_t>(std::count_if(images.begin(), images.end(), [](const auto& s) { return s.ok; }));
}

std::size_t StageSummary::failures() const { return images.size() - successes(); }

StageSummary run_explain(const Dataset& dataset, const RunConfig& config, const RunOptions& options) {
  const RunLayout layout(options);
  write_json(layout.config(), config.to_json());
  save_dataset(dataset, layout.dataset());
  return run_stage("explain", dataset, config, options, explain_one);
}

StageSummary run_perturb(const Dataset& dataset, const RunConfig& config, const RunOptions& options) {
  return run_stage("perturb", dataset, config, options, perturb_one);
}

TriageReport run_triage(const Dataset& dataset, const RunConfig& config, const RunOptions& options) {
  config.validate();
  const std::string started = now_utc();
  const RunLayout layout(options);
  const auto methods = map_methods(config);
  std::vector<FalsePositive> all;
  std::map<std::string, TriageEvidence> evidence;
  for (const auto& im : dataset.images) {
    const DetectionSet dets = load_detections(layout, im.id);
    auto fps = find_false_positives(dets, im.annotations, config.triage);
    if (fps.empty()) continue;
    for (auto& fp : fps) {
      for (const auto& m : methods) {
        const auto path = layout.map(im.id, m);
        if (fs::exists(path)) fp.explanations[m] = path.lexically_relative(layout.reports()).generic_string();
      }
    }
    TriageEvidence ev{load_image(im.path), std::nullopt, dets, im.annotations};
    const auto map_path = layout.map(im.id, config.triage_map);
    if (config.triage_map != "none" && fs::exists(map_path)) ev.map = load_map_png(map_path);
    evidence.emplace(im.id, std::move(ev));
    all.insert(all.end(), std::make_move_iterator(fps.begin()), std::make_move_iterator(fps.end()));
  }
  TriageReport report =
      build_triage_report(std::move(all), evidence, layout.overlays(), layout.triage(), config.triage);
  update_manifest(layout, options, config, dataset, "triage",
                  {{"started_at", started},
                   {"finished_at", now_utc()},
                   {"workers", 1},
                   {"false_positives", report.items.size()}});
  return report;
}

EvaluationResult run_evaluate(const Dataset& dataset, const RunConfig& config, const RunOptions& options) {
  config.validate();
  const std::string started = now_utc();
  const auto log = sink_of(options);
  const RunLayout layout(options);
  const auto methods = map_methods(config);
  const double theta = config.fidelity.attribution_threshold;
  EvaluationResult out;

  std::vector<std::vector<FidelityRecord>> fid_slots(dataset.images.size());
  std::vector<std::vector<FaithfulnessRecord>> faith_slots(dataset.images.size());
  std::vector<std::vector<std::string>> problem_slots(dataset.images.size());
  parallel_for(dataset.images.size(), options.workers, [&](std::size_t i, int) {
    const auto& im = dataset.images[i];
    const DetectionSet dets = load_detections(layout, im.id);
    if (!im.annotations.empty()) {
      for (const auto& m : methods) {
        if (!fs::exists(layout.map(im.id, m))) continue;
        const AttributionMap map = load_map_png(layout.map(im.id, m));
        FidelityRecord rec;
        rec.image_id = im.id;
        rec.method = m;
        rec.attribution_ratio = attribution_ratio(map, im.annotations, theta);
        rec.image_hit = max_saliency_hit(map, im.annotations);
        rec.boxes = static_cast<int>(im.annotations.size());
        for (const auto& g : im.annotations) {
          const auto idx = match_index(Detection(g.box, g.class_id, 1.0), dets, config.triage.iou);
          if (!idx) continue;
          const auto det_path = layout.detection_map(im.id, m, *idx);
          const bool hit = fs::exists(det_path) ? max_saliency_hit(load_map_png(det_path), im.annotations)
                                                : max_saliency_hit(map, im.annotations);
          if (hit) ++rec.box_hits;
        }
        fid_slots[i].push_back(std::move(rec));
      }
    }
    if (dets.empty()) return;
    const json pj = read_json(layout.perturbation(im.id));
    for (const auto& entry : pj.at("results")) {
      const std::size_t k = entry.at("target_index").get<std::size_t>();
      const std::string where = im.id + "/" + std::to_string(k) + "/" + entry.at("op").get<std::string>();
      if (entry.contains("result")) {
        const auto r = perturbation_result_from_json(entry.at("result"));
        check_perturbation(r, where, problem_slots[i]);
        auto rec = faithfulness_record(im.id, k, r);
        rec.completed = entry.at("completed").get<bool>();
        faith_slots[i].push_back(rec);
      } else {
        FaithfulnessRecord rec;
        rec.image_id = im.id;
        rec.target_index = k;
        rec.op = perturbation_kind_from_string(entry.at("op").get<std::string>());
        rec.original_confidence = dets[k].score;
        rec.perturbed_confidence = dets[k].score;
        rec.completed = false;
        faith_slots[i].push_back(rec);
      }
    }
  });

  std::vector<FidelityRecord> fidelity;
  std::vector<FaithfulnessRecord> faithfulness;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    fidelity.insert(fidelity.end(), fid_slots[i].begin(), fid_slots[i].end());
    faithfulness.insert(faithfulness.end(), faith_slots[i].begin(), faith_slots[i].end());
    out.problems.insert(out.problems.end(), problem_slots[i].begin(), problem_slots[i].end());
  }

  out.metrics = aggregate_report(fidelity, faithfulness, config.search.tau, theta, config.to_json());
  const json report = out.metrics.to_json();
  write_json(layout.metrics(), report);
  write_text_file(layout.metrics_csv(), per_image_csv(fidelity, faithfulness, config.search.tau));
  for (auto& p : validate_metrics_json(report)) out.problems.push_back("metrics: " + p);

  out.triage = run_triage(dataset, config, options);
  std::size_t total = 0;
  for (const auto& [name, n] : out.triage.counts()) total += n;
  if (total != out.triage.items.size()) out.problems.push_back("triage: category counts do not sum to FP count");
  for (const auto& fp : out.triage.items) {
    if (!(fp.best_gt_iou < out.triage.thresholds.iou)) {
      out.problems.push_back("triage: " + fp.image_id + " FP overlaps a box above the threshold");
    }
  }

  update_manifest(layout, options, config, dataset, "evaluate",
                  {{"started_at", started},
                   {"finished_at", now_utc()},
                   {"workers", options.workers},
                   {"fidelity_rows", fidelity.size()},
                   {"faithfulness_rows", faithfulness.size()},
                   {"problems", out.problems}});
  for (const auto& p : out.problems) log(LogLevel::kError, "invariant: " + p);
  log(LogLevel::kInfo, "evaluate: " + std::to_string(fidelity.size()) + " fidelity rows, " +
                           std::to_string(faithfulness.size()) + " faithfulness rows, " +
                           std::to_string(out.triage.items.size()) + " false positives");
  return out;
}

std::string run_report(const RunOptions& options) {
  const RunLayout layout(options);
  const json metrics = read_json(layout.metrics());
  const TriageReport triage = load_triage_report(layout.triage());
  std::ostringstream md;
  md << "# Run " << options.run_id << "\n\n";
  md << "tau " << metrics.at("tau").get<double>() << ", theta " << metrics.at("theta").get<double>() << "\n\n";
  md << "## Localization\n\n";
  md << "| method | attribution ratio | hit rate (images) | hit rate (boxes) |\n";
  md << "|---|---|---|---|\n";
  for (const auto& [method, f] : metrics.at("fidelity").items()) {
    std::string ratio = "n/a";
    if (f.at("attribution_ratio").is_object()) {
      const auto& r = f.at("attribution_ratio");
      ratio = pct(r.at("mean").get<double>()) + " ± " + pct(r.at("sd").get<double>()) + " (n=" +
              std::to_string(r.at("n").get<std::size_t>()) + ")";
    }
    const auto& hi = f.at("hit_rate_images");
    const auto& hb = f.at("hit_rate_boxes");
    md << "| " << method << " | " << ratio << " | " << pct(hi.at("rate").get<double>()) << " ("
       << hi.at("hits").get<std::size_t>() << "/" << hi.at("total").get<std::size_t>() << ") | "
       << pct(hb.at("rate").get<double>()) << " (" << hb.at("hits").get<std::size_t>() << "/"
       << hb.at("total").get<std::size_t>() << ") |\n";
  }
  md << "\n## Faithfulness\n\n";
  md << "| op | N | flip rate | CD | CD_flip | segments (flipped) | area (flipped) |\n";
  md << "|---|---|---|---|---|---|---|\n";
  for (const auto& [op, f] : metrics.at("faithfulness").items()) {
    auto stat = [](const json& s, bool percent) {
      if (!s.is_object()) return std::string("n/a");
      const double m = s.at("mean").get<double>(), sd = s.at("sd").get<double>();
      return percent ? pct(m) + " ± " + pct(sd) : fixed(m, 2) + " ± " + fixed(sd, 2);
    };
    md << "| " << op << " | " << f.at("N").get<std::size_t>() << " | " << pct(f.at("FR").get<double>())
       << " | " << fixed(f.at("CD").get<double>(), 3) << " | "
       << (f.at("CD_flip").is_null() ? std::string("n/a") : fixed(f.at("CD_flip").get<double>(), 3)) << " | "
       << stat(f.at("segments_flipped"), false) << " | " << stat(f.at("area_fraction_flipped"), true) << " |\n";
  }
  md << "\n## False positives\n\n" << triage.items.size() << " detections without a matching box.\n\n";
  for (const auto& [category, n] : triage.counts()) {
    if (n > 0) md << "- " << category << ": " << n << "\n";
  }
  const std::string text = md.str();
  write_text_file(layout.summary(), text);
  return text;
}

}  // namespace detxai
