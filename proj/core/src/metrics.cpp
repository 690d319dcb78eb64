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
#include "detxai/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "detxai/encoding.hpp"
#include "detxai/errors.hpp"

namespace detxai {

using nlohmann::json;

namespace {

bool inside_any(std::span<const AnnotationBox> gt, int row, int col) {
  return std::any_of(gt.begin(), gt.end(),
                     [&](const AnnotationBox& b) { return b.box.covers_pixel(row, col); });
}

json stat_json(const std::optional<SummaryStat>& s) {
  if (!s) return nullptr;
  return {{"mean", s->mean}, {"sd", s->sd}, {"n", s->n}, {"single_sample", s->single_sample}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

double rate(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

void FidelityParams::validate() const {
  if (!(attribution_threshold > 0.0 && attribution_threshold < 1.0)) {
    throw InvalidArgument("attribution threshold must lie in (0,1)");
  }
}

std::optional<double> attribution_ratio(const AttributionMap& map,
                                        std::span<const AnnotationBox> gt, double theta) {
  if (gt.empty()) throw InvalidArgument("attribution ratio needs at least one annotation");
  std::size_t high = 0;
  std::size_t inside = 0;
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      if (!(map.at(r, c) >= theta)) continue;
      ++high;
      if (inside_any(gt, r, c)) ++inside;
    }
  }
  if (high == 0) return std::nullopt;
  return static_cast<double>(inside) / static_cast<double>(high);
}

bool max_saliency_hit(const AttributionMap& map, std::span<const AnnotationBox> gt) {
  if (gt.empty()) throw InvalidArgument("hit-rate needs at least one annotation");
  int br = 0, bc = 0;
  double best = map.at(0, 0);
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      if (map.at(r, c) > best) {
        best = map.at(r, c);
        br = r;
        bc = c;
      }
    }
  }
  return inside_any(gt, br, bc);
}

FaithfulnessRecord faithfulness_record(const std::string& image_id, std::size_t target_index,
                                       const PerturbationResult& result) {
  FaithfulnessRecord rec;
  rec.image_id = image_id;
  rec.target_index = target_index;
  rec.op = result.op.kind;
  rec.original_confidence = result.original_confidence;
  rec.perturbed_confidence = result.final_confidence;
  rec.area_fraction = result.area_fraction;
  rec.segment_count = static_cast<int>(result.selected_segments.size());
  rec.completed = result.stop_reason != "aborted";
  return rec;
}

double flip_rate(std::span<const FaithfulnessRecord> records, double tau) {
  if (records.empty()) throw InvalidArgument("flip rate needs at least one record");
  const auto flipped = std::count_if(records.begin(), records.end(),
                                     [tau](const auto& r) { return r.perturbed_confidence < tau; });
  return static_cast<double>(flipped) / static_cast<double>(records.size());
}

ConfidenceDrop confidence_drop(std::span<const FaithfulnessRecord> records, double tau) {
  if (records.empty()) throw InvalidArgument("confidence drop needs at least one record");
  ConfidenceDrop out;
  out.n = records.size();
  double all = 0.0, unflipped = 0.0;
  for (const auto& r : records) {
    const double drop = r.original_confidence - r.perturbed_confidence;
    all += drop;
    if (r.perturbed_confidence >= tau) {
      unflipped += drop;
      ++out.n_unflipped;
    }
  }
  out.mean_drop = all / static_cast<double>(out.n);
  if (out.n_unflipped > 0) out.unflipped_drop = unflipped / static_cast<double>(out.n_unflipped);
  return out;
}

std::optional<SummaryStat> summarize(std::span<const double> values) {
  if (values.empty()) return std::nullopt;
  SummaryStat s;
  s.n = values.size();
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(s.n);
  if (s.n == 1) {
    s.single_sample = true;
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  return s;
}

json MetricsReport::to_json() const {
  json fid = json::object();
  for (const auto& [method, f] : fidelity) {
    fid[method] = {{"attribution_ratio", stat_json(f.attribution_ratio)},
                   {"images", f.images},
                   {"ratio_missing", f.ratio_missing},
                   {"hit_rate_images",
                    {{"hits", f.image_hits}, {"total", f.images_scored}, {"rate", rate(f.image_hits, f.images_scored)}}},
                   {"hit_rate_boxes",
                    {{"hits", f.box_hits}, {"total", f.boxes}, {"rate", rate(f.box_hits, f.boxes)}}}};
  }
  json faith = json::object();
  for (const auto& [op, f] : faithfulness) {
    faith[op] = {{"attempted", f.attempted},
                 {"completed", f.completed},
                 {"N", f.drop.n},
                 {"flipped", f.flipped},
                 {"zero_suppressed", f.zero_suppressed},
                 {"FR", f.flip_rate},
                 {"CD", f.drop.mean_drop},
                 {"CD_flip", optional_json(f.drop.unflipped_drop)},
                 {"U_count", f.drop.n_unflipped},
                 {"area_fraction_flipped", stat_json(f.area_fraction_flipped)},
                 {"segments_flipped", stat_json(f.segments_flipped)}};
  }
  return {{"schema", "detxai.metrics"},
          {"version", 1},
          {"tau", tau},
          {"theta", theta},
          {"config", config},
          {"fidelity", std::move(fid)},
          {"faithfulness", std::move(faith)}};
}

MetricsReport aggregate_report(std::span<const FidelityRecord> fidelity,
                               std::span<const FaithfulnessRecord> faithfulness, double tau,
                               double theta, json config) {
  MetricsReport report;
  report.config = std::move(config);
  report.tau = tau;
  report.theta = theta;

  std::map<std::string, std::vector<double>> ratios;
  for (const auto& r : fidelity) {
    auto& f = report.fidelity[r.method];
    ++f.images;
    if (r.attribution_ratio) {
      ratios[r.method].push_back(*r.attribution_ratio);
    } else {
      ++f.ratio_missing;
    }
    if (r.image_hit) {
      ++f.images_scored;
      if (*r.image_hit) ++f.image_hits;
    }
    f.box_hits += static_cast<std::size_t>(r.box_hits);
    f.boxes += static_cast<std::size_t>(r.boxes);
  }
  for (auto& [method, f] : report.fidelity) f.attribution_ratio = summarize(ratios[method]);

  std::map<std::string, std::vector<FaithfulnessRecord>> by_op;
  for (const auto& r : faithfulness) {
    auto& f = report.faithfulness[to_string(r.op)];
    ++f.attempted;
    if (!r.completed) continue;
    ++f.completed;
    by_op[to_string(r.op)].push_back(r);
  }
  for (auto& [op, f] : report.faithfulness) {
    const auto& recs = by_op[op];
    if (recs.empty()) continue;
    f.flip_rate = flip_rate(recs, tau);
    f.drop = confidence_drop(recs, tau);
    std::vector<double> areas, segs;
    for (const auto& r : recs) {
      if (r.perturbed_confidence < tau) {
        ++f.flipped;
        areas.push_back(r.area_fraction);
        segs.push_back(r.segment_count);
      }
      if (r.perturbed_confidence == 0.0) ++f.zero_suppressed;
    }
    f.area_fraction_flipped = summarize(areas);
    f.segments_flipped = summarize(segs);
  }
  return report;
}

std::string per_image_csv(std::span<const FidelityRecord> fidelity,
                          std::span<const FaithfulnessRecord> faithfulness, double tau) {
  std::ostringstream out;
  out << "image_id,kind,name,target_index,attribution_ratio,image_hit,box_hits,boxes,"
         "original_confidence,perturbed_confidence,flipped,area_fraction,segments\n";
  for (const auto& r : fidelity) {
    out << r.image_id << ",fidelity," << r.method << ",,"
        << (r.attribution_ratio ? format6(*r.attribution_ratio) : "") << ","
        << (r.image_hit ? (*r.image_hit ? "1" : "0") : "") << "," << r.box_hits << "," << r.boxes
        << ",,,,,\n";
  }
  for (const auto& r : faithfulness) {
    out << r.image_id << ",faithfulness," << to_string(r.op) << "," << r.target_index
        << ",,,,," << format6(r.original_confidence) << "," << format6(r.perturbed_confidence)
        << "," << (r.perturbed_confidence < tau ? 1 : 0) << "," << format6(r.area_fraction) << ","
        << r.segment_count << "\n";
  }
  return out.str();
}

std::vector<std::string> validate_metrics_json(const json& report) {
  std::vector<std::string> problems;
  auto need = [&](const json& obj, const char* key, json::value_t type, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
      problems.push_back(where + ": missing '" + key + "'");
      return false;
    }
    const auto t = obj.at(key).type();
    const bool integral = t == json::value_t::number_integer || t == json::value_t::number_unsigned;
    const bool numeric = (type == json::value_t::number_float || type == json::value_t::number_unsigned) &&
                         integral;
    if (t != type && !numeric) {
      problems.push_back(where + ": '" + key + "' has the wrong type");
      return false;
    }
    return true;
  };
  auto unit = [&](const json& v, const std::string& where) {
    if (v.is_number() && (v.get<double>() < 0.0 || v.get<double>() > 1.0)) {
      problems.push_back(where + " outside [0,1]");
    }
  };
  if (!report.is_object()) return {"report is not an object"};
  if (need(report, "schema", json::value_t::string, "report") &&
      report.at("schema") != "detxai.metrics") {
    problems.push_back("report: unexpected schema name");
  }
  if (!report.contains("version") || !report.at("version").is_number_integer() ||
      report.at("version") != 1) {
    problems.push_back("report: missing or unsupported version");
  }
  need(report, "tau", json::value_t::number_float, "report");
  need(report, "theta", json::value_t::number_float, "report");
  need(report, "config", json::value_t::object, "report");
  if (need(report, "fidelity", json::value_t::object, "report")) {
    for (const auto& [method, f] : report.at("fidelity").items()) {
      const std::string where = "fidelity." + method;
      if (f.contains("attribution_ratio") && f.at("attribution_ratio").is_object()) {
        unit(f.at("attribution_ratio").at("mean"), where + ".attribution_ratio.mean");
      }
      for (const char* key : {"hit_rate_images", "hit_rate_boxes"}) {
        if (need(f, key, json::value_t::object, where)) {
          const auto& h = f.at(key);
          if (need(h, "rate", json::value_t::number_float, where + "." + key)) {
            unit(h.at("rate"), where + "." + key + ".rate");
          }
          if (h.contains("hits") && h.contains("total") && h.at("hits").get<double>() > h.at("total").get<double>()) {
            problems.push_back(where + "." + key + ": hits exceed total");
          }
        }
      }
    }
  }
  if (need(report, "faithfulness", json::value_t::object, "report")) {
    for (const auto& [op, f] : report.at("faithfulness").items()) {
      const std::string where = "faithfulness." + op;
      if (need(f, "FR", json::value_t::number_float, where)) unit(f.at("FR"), where + ".FR");
      if (need(f, "CD", json::value_t::number_float, where)) {
        const double cd = f.at("CD").get<double>();
        if (cd < -1.0 || cd > 1.0) problems.push_back(where + ".CD outside [-1,1]");
      }
      if (!f.contains("CD_flip")) problems.push_back(where + ": missing 'CD_flip'");
      need(f, "N", json::value_t::number_unsigned, where);
      need(f, "U_count", json::value_t::number_unsigned, where);
    }
  }
  return problems;
}

}  // namespace detxai
