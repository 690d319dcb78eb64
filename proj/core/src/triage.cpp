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
#include "detxai/triage.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <tuple>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "detxai/errors.hpp"
#include "detxai/image_io.hpp"

namespace detxai {

using nlohmann::json;

namespace {

constexpr std::array kCategories = {
    FpCategory::kMissedAnnotation, FpCategory::kDarkEdgeShape, FpCategory::kDarkOpenWater,
    FpCategory::kMergedDetection,  FpCategory::kBlackIce,      FpCategory::kOther,
    FpCategory::kUnreviewed,
};

constexpr double kOverlayAlpha = 0.45;

cv::Mat to_rgb8(const ImageBuffer& image) {
  cv::Mat out(image.height(), image.width(), CV_8UC3);
  for (int r = 0; r < image.height(); ++r) {
    auto* row = out.ptr<cv::Vec3b>(r);
    for (int c = 0; c < image.width(); ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        row[c][ch] = static_cast<std::uint8_t>(std::lround(image.at(r, c, ch) * 255.0));
      }
    }
  }
  return out;
}

cv::Rect pixel_rect(const Box& b, int width, int height) {
  // Pixels whose centers fall inside the box.
  const int c0 = std::clamp(static_cast<int>(std::ceil(b.x_min() - 0.5)), 0, width - 1);
  const int r0 = std::clamp(static_cast<int>(std::ceil(b.y_min() - 0.5)), 0, height - 1);
  const int c1 = std::clamp(static_cast<int>(std::ceil(b.x_max() - 0.5)) - 1, c0, width - 1);
  const int r1 = std::clamp(static_cast<int>(std::ceil(b.y_max() - 0.5)) - 1, r0, height - 1);
  return {cv::Point(c0, r0), cv::Point(c1 + 1, r1 + 1)};
}

void dashed_rect(cv::Mat& img, const cv::Rect& r, const cv::Vec3b& color) {
  constexpr int kOn = 4, kPeriod = 7;
  auto put = [&](int x, int y, int step) {
    if (step % kPeriod < kOn) img.at<cv::Vec3b>(y, x) = color;
  };
  const int x0 = r.x, y0 = r.y, x1 = r.x + r.width - 1, y1 = r.y + r.height - 1;
  for (int x = x0; x <= x1; ++x) {
    put(x, y0, x - x0);
    put(x, y1, x - x0);
  }
  for (int y = y0; y <= y1; ++y) {
    put(x0, y, y - y0);
    put(x1, y, y - y0);
  }
}

json fp_to_json(const FalsePositive& fp) {
  return {{"image_id", fp.image_id},
          {"detection_index", fp.detection_index},
          {"box", {fp.detection.box.x_min(), fp.detection.box.y_min(), fp.detection.box.x_max(),
                   fp.detection.box.y_max()}},
          {"class_id", fp.detection.class_id},
          {"score", fp.detection.score},
          {"best_gt_iou", fp.best_gt_iou},
          {"explanations", fp.explanations},
          {"overlay", fp.overlay},
          {"category", std::string(to_string(fp.category))},
          {"note", fp.note}};
}

FalsePositive fp_from_json(const json& j) {
  FalsePositive fp;
  fp.image_id = j.at("image_id").get<std::string>();
  fp.detection_index = j.at("detection_index").get<std::size_t>();
  const auto& b = j.at("box");
  fp.detection = Detection(Box(b.at(0), b.at(1), b.at(2), b.at(3)), j.at("class_id").get<int>(),
                           j.at("score").get<double>());
  fp.best_gt_iou = j.at("best_gt_iou").get<double>();
  fp.explanations = j.value("explanations", std::map<std::string, std::string>{});
  fp.overlay = j.value("overlay", std::string{});
  fp.category = fp_category_from_string(j.value("category", std::string("unreviewed")));
  fp.note = j.value("note", std::string{});
  return fp;
}

}  // namespace

std::string_view to_string(FpCategory c) {
  switch (c) {
    case FpCategory::kMissedAnnotation: return "missed_annotation";
    case FpCategory::kDarkEdgeShape: return "dark_edge_shape";
    case FpCategory::kDarkOpenWater: return "dark_open_water";
    case FpCategory::kMergedDetection: return "merged_detection";
    case FpCategory::kBlackIce: return "black_ice";
    case FpCategory::kOther: return "other";
    case FpCategory::kUnreviewed: return "unreviewed";
  }
  return "unreviewed";
}

FpCategory fp_category_from_string(std::string_view s) {
  for (auto c : kCategories) {
    if (to_string(c) == s) return c;
  }
  throw InvalidArgument("unknown false-positive category: " + std::string(s));
}

std::span<const FpCategory> all_fp_categories() { return kCategories; }

void TriageThresholds::validate() const {
  if (!(iou > 0.0 && iou < 1.0)) throw InvalidArgument("triage iou threshold must lie in (0,1)");
  if (!(score > 0.0 && score < 1.0)) {
    throw InvalidArgument("triage score threshold must lie in (0,1)");
  }
}

std::vector<FalsePositive> find_false_positives(const DetectionSet& detections,
                                                std::span<const AnnotationBox> gt,
                                                const TriageThresholds& thresholds) {
  thresholds.validate();
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (detections[i].score >= thresholds.score) kept.push_back(i);
  }

  struct Pair {
    double iou;
    std::size_t det;
    std::size_t gt;
  };
  std::vector<Pair> pairs;
  for (auto d : kept) {
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (gt[g].class_id != detections[d].class_id) continue;
      const double v = iou(detections[d].box, gt[g].box);
      if (v >= thresholds.iou) pairs.push_back({v, d, g});
    }
  }
  // Detections are already in score order, so equal IoU prefers the higher score.
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& a, const Pair& b) { return a.iou > b.iou; });

  std::vector<bool> det_used(detections.size(), false);
  std::vector<bool> gt_used(gt.size(), false);
  for (const auto& p : pairs) {
    if (det_used[p.det] || gt_used[p.gt]) continue;
    det_used[p.det] = true;
    gt_used[p.gt] = true;
  }

  std::vector<FalsePositive> out;
  for (auto d : kept) {
    if (det_used[d]) continue;
    FalsePositive fp;
    fp.image_id = detections.image_id();
    fp.detection_index = d;
    fp.detection = detections[d];
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (gt_used[g] || gt[g].class_id != detections[d].class_id) continue;
      fp.best_gt_iou = std::max(fp.best_gt_iou, iou(detections[d].box, gt[g].box));
    }
    out.push_back(std::move(fp));
  }
  return out;
}

std::vector<std::uint8_t> render_overlay(const ImageBuffer& image, const AttributionMap* map,
                                         const DetectionSet& detections,
                                         std::span<const AnnotationBox> gt) {
  if (map && (map->width() != image.width() || map->height() != image.height())) {
    throw InvalidArgument("overlay map shape differs from the image");
  }
  cv::Mat rgb = to_rgb8(image);
  if (map) {
    cv::Mat gray(image.height(), image.width(), CV_8UC1);
    for (int r = 0; r < image.height(); ++r) {
      for (int c = 0; c < image.width(); ++c) {
        gray.at<std::uint8_t>(r, c) = static_cast<std::uint8_t>(std::lround(map->at(r, c) * 255.0));
      }
    }
    cv::Mat heat_bgr;
    cv::applyColorMap(gray, heat_bgr, cv::COLORMAP_JET);
    for (int r = 0; r < image.height(); ++r) {
      for (int c = 0; c < image.width(); ++c) {
        if (!(map->at(r, c) > 0.0)) continue;
        const auto& h = heat_bgr.at<cv::Vec3b>(r, c);
        auto& px = rgb.at<cv::Vec3b>(r, c);
        for (int ch = 0; ch < 3; ++ch) {
          const double heat = h[2 - ch];  // BGR -> RGB
          px[ch] = cv::saturate_cast<std::uint8_t>(
              std::lround((1.0 - kOverlayAlpha) * px[ch] + kOverlayAlpha * heat));
        }
      }
    }
  }

  const cv::Vec3b green(0, 255, 0);
  for (const auto& g : gt) dashed_rect(rgb, pixel_rect(g.box, image.width(), image.height()), green);

  const cv::Scalar red(255, 0, 0);
  for (const auto& d : detections) {
    const auto rect = pixel_rect(d.box, image.width(), image.height());
    cv::rectangle(rgb, rect, red, 1, cv::LINE_8);
    char label[16];
    std::snprintf(label, sizeof label, "%.2f", d.score);
    const int baseline_y = std::max(rect.y - 2, 8);
    cv::putText(rgb, label, cv::Point(rect.x, baseline_y), cv::FONT_HERSHEY_PLAIN, 0.7, red, 1,
                cv::LINE_8);
  }

  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  std::vector<std::uint8_t> png;
  if (!cv::imencode(".png", bgr, png)) throw IoError("failed to encode overlay");
  return png;
}

std::map<std::string, std::size_t> TriageReport::counts() const {
  std::map<std::string, std::size_t> out;
  for (auto c : kCategories) out[std::string(to_string(c))] = 0;
  for (const auto& fp : items) ++out[std::string(to_string(fp.category))];
  return out;
}

json TriageReport::to_json() const {
  json items_json = json::array();
  for (const auto& fp : items) items_json.push_back(fp_to_json(fp));
  return {{"schema", "detxai.triage"},
          {"version", 1},
          {"thresholds", {{"iou", thresholds.iou}, {"score", thresholds.score}}},
          {"false_positive_count", items.size()},
          {"counts", counts()},
          {"false_positives", std::move(items_json)},
          {"notes", notes}};
}

std::string TriageReport::dump() const { return to_json().dump(2) + "\n"; }

TriageReport TriageReport::from_json(const json& j) {
  try {
    if (j.at("schema") != "detxai.triage") throw IoError("not a triage report");
    if (j.at("version") != 1) throw IoError("unsupported triage report version");
    TriageReport report;
    report.thresholds.iou = j.at("thresholds").at("iou").get<double>();
    report.thresholds.score = j.at("thresholds").at("score").get<double>();
    for (const auto& item : j.at("false_positives")) report.items.push_back(fp_from_json(item));
    report.notes = j.value("notes", std::string{});
    return report;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed triage report: ") + e.what());
  }
}

TriageReport build_triage_report(std::vector<FalsePositive> fps,
                                 const std::map<std::string, TriageEvidence>& evidence,
                                 const std::filesystem::path& overlay_dir,
                                 const std::filesystem::path& report_path,
                                 const TriageThresholds& thresholds) {
  TriageReport report;
  report.thresholds = thresholds;
  std::sort(fps.begin(), fps.end(), [](const FalsePositive& a, const FalsePositive& b) {
    return std::tie(a.image_id, a.detection_index) < std::tie(b.image_id, b.detection_index);
  });
  std::map<std::string, std::string> rendered;
  for (auto& fp : fps) {
    auto it = rendered.find(fp.image_id);
    if (it == rendered.end()) {
      const auto ev = evidence.find(fp.image_id);
      if (ev == evidence.end()) {
        throw InvalidArgument("no explanation evidence for image " + fp.image_id);
      }
      const auto& e = ev->second;
      const auto file = overlay_dir / (fp.image_id + ".triage.png");
      write_file_bytes(file, render_overlay(e.image, e.map ? &*e.map : nullptr, e.detections, e.gt));
      const auto rel = std::filesystem::absolute(file).lexically_normal().lexically_relative(
          std::filesystem::absolute(report_path).parent_path().lexically_normal());
      it = rendered.emplace(fp.image_id, rel.generic_string()).first;
    }
    fp.overlay = it->second;
  }
  report.items = std::move(fps);
  save_triage_report(report, report_path);
  return report;
}

TriageReport load_triage_report(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError("cannot parse " + path.string() + ": " + e.what());
  }
  return TriageReport::from_json(j);
}

void save_triage_report(const TriageReport& report, const std::filesystem::path& path) {
  write_text_file(path, report.dump());
}

}  // namespace detxai
