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
#include "detxai/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <opencv2/imgproc.hpp>

#include "detxai/cv_bridge.hpp"
#include "detxai/errors.hpp"
#include "detxai/random.hpp"

namespace detxai {

using nlohmann::json;

std::string to_string(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::kMaskMean: return "mask_mean";
    case PerturbationKind::kMaskBlack: return "mask_black";
    case PerturbationKind::kNoise: return "noise";
    case PerturbationKind::kBlur: return "blur";
  }
  return "mask_mean";
}

PerturbationKind perturbation_kind_from_string(std::string_view s) {
  if (s == "mask_mean") return PerturbationKind::kMaskMean;
  if (s == "mask_black") return PerturbationKind::kMaskBlack;
  if (s == "noise") return PerturbationKind::kNoise;
  if (s == "blur") return PerturbationKind::kBlur;
  throw InvalidArgument("unknown perturbation '" + std::string(s) + "'");
}

void PerturbationOp::validate() const {
  if (!(blur_sigma > 0.0)) throw InvalidArgument("blur_sigma must be > 0");
  if (!(noise_level >= 0.0 && noise_level <= 1.0)) throw InvalidArgument("noise level must lie in [0,1]");
  if (mask_dilation_px < 0) throw InvalidArgument("mask_dilation_px must be >= 0");
}

void SearchConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in (0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
  if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
  if (!(ring_fraction >= 0.0)) throw InvalidArgument("ring_fraction must be >= 0");
  if (min_ring_px < 0) throw InvalidArgument("min_ring_px must be >= 0");
  if (min_region_segments < 1) throw InvalidArgument("min_region_segments must be >= 1");
}

int SearchConfig::ring_width(int image_height, int image_width) const {
  const int frac = static_cast<int>(std::lround(ring_fraction * std::min(image_height, image_width)));
  return std::max(min_ring_px, frac);
}

std::vector<int> eligible_region(const SegmentMap& segmap, const Box& target_box,
                                 const SearchConfig& config) {
  config.validate();
  std::set<int> region;
  for (int id : segmap.segments_touching(target_box)) {
    if (segmap.eligible(id)) region.insert(id);
  }
  if (static_cast<int>(region.size()) < config.min_region_segments) {
    const Box outer = dilate_box(target_box, config.ring_width(segmap.height(), segmap.width()),
                                 segmap.width(), segmap.height());
    for (int id : segmap.segments_touching(outer)) {
      if (!segmap.eligible(id) || region.count(id)) continue;
      // Only segments with a pixel in the ring (outer box minus target box).
      for (std::size_t p : segmap.pixels(id)) {
        const int r = static_cast<int>(p / segmap.width());
        const int c = static_cast<int>(p % segmap.width());
        if (outer.covers_pixel(r, c) && !target_box.covers_pixel(r, c)) {
          region.insert(id);
          break;
        }
      }
    }
  }
  if (region.empty()) throw NoEligibleRegionError("no eligible segments in or around the target box");
  return {region.begin(), region.end()};
}

Grid<std::uint8_t> perturbation_mask(const SegmentMap& segmap, std::span<const int> segments,
                                     int dilation_px) {
  if (dilation_px < 0) throw InvalidArgument("dilation must be >= 0");
  Grid<std::uint8_t> mask(segmap.height(), segmap.width(), 0);
  for (int id : segments) {
    if (id < 0 || id >= segmap.segment_count()) throw InvalidArgument("unknown segment id");
    for (std::size_t p : segmap.pixels(id)) mask[p] = 1;
  }
  if (dilation_px == 0) return mask;
  cv::Mat m = to_mask_mat(mask);
  cv::Mat out;
  const cv::Mat kernel =
      cv::getStructuringElement(cv::MORPH_RECT, cv::Size(2 * dilation_px + 1, 2 * dilation_px + 1));
  cv::dilate(m, out, kernel, cv::Point(-1, -1), 1, cv::BORDER_CONSTANT, cv::Scalar(0));
  return from_mask_mat(out);
}

PreparedPerturbation::PreparedPerturbation(const ImageBuffer& image, const PerturbationOp& op)
    : original_(image), replacement_(image) {
  op.validate();
  auto rep = replacement_.values();
  switch (op.kind) {
    case PerturbationKind::kMaskMean: {
      const auto mean = image.channel_mean();
      for (std::size_t i = 0; i < rep.size(); ++i) rep[i] = static_cast<float>(mean[i % 3]);
      break;
    }
    case PerturbationKind::kMaskBlack:
      std::fill(rep.begin(), rep.end(), 0.f);
      break;
    case PerturbationKind::kNoise: {
      Rng rng(op.noise_seed);
      const auto lambda = static_cast<float>(op.noise_level);
      for (auto& v : rep) {
        const auto u = static_cast<float>(rng.uniform());
        v = std::clamp((1.f - lambda) * v + lambda * u, 0.f, 1.f);
      }
      break;
    }
    case PerturbationKind::kBlur: {
      cv::Mat blurred;
      cv::GaussianBlur(to_bgr_mat(image), blurred, cv::Size(0, 0), op.blur_sigma, op.blur_sigma,
                       cv::BORDER_REFLECT_101);
      replacement_ = from_bgr_mat(blurred);
      break;
    }
  }
}

ImageBuffer PreparedPerturbation::apply(const Grid<std::uint8_t>& mask) const {
  if (mask.height() != original_.height() || mask.width() != original_.width()) {
    throw InvalidArgument("mask and image differ in shape");
  }
  ImageBuffer out = original_;
  auto dst = out.values();
  auto src = replacement_.values();
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (!mask[p]) continue;
    for (int ch = 0; ch < 3; ++ch) dst[p * 3 + ch] = src[p * 3 + ch];
  }
  return out;
}

ImageBuffer PreparedPerturbation::apply(std::span<const std::size_t> pixels) const {
  ImageBuffer out = original_;
  auto dst = out.values();
  auto src = replacement_.values();
  for (std::size_t p : pixels) {
    for (int ch = 0; ch < 3; ++ch) dst[p * 3 + ch] = src[p * 3 + ch];
  }
  return out;
}

ImageBuffer apply_perturbation(const ImageBuffer& image, std::span<const int> segments,
                               const SegmentMap& segmap, const PerturbationOp& op) {
  if (segmap.height() != image.height() || segmap.width() != image.width()) {
    throw InvalidArgument("segment map and image differ in shape");
  }
  return PreparedPerturbation(image, op).apply(perturbation_mask(segmap, segments, op.mask_dilation_px));
}

PerturbationResult greedy_deletion(Detector& detector, const ImageBuffer& image,
                                   const Detection& target, const PerturbationOp& op,
                                   const SegmentMap& segmap, const SearchConfig& config) {
  config.validate();
  op.validate();
  PerturbationResult result;
  result.target = target;
  result.op = op;
  result.config = config;
  result.region = eligible_region(segmap, target.box, config);

  const double total_px = static_cast<double>(image.pixel_count());
  auto finish = [&](std::string reason) {
    result.final_confidence =
        result.confidence_trace.empty() ? result.original_confidence : result.confidence_trace.back();
    result.flipped = result.final_confidence < config.tau;
    result.zero_suppressed = result.final_confidence == 0.0;
    result.area_fraction = result.area_trace.empty() ? 0.0 : result.area_trace.back();
    result.iterations = static_cast<int>(result.selected_segments.size());
    result.stop_reason = std::move(reason);
    return result;
  };

  try {
    result.original_confidence = matched_confidence(target, detector.detect_one(image), config.delta);
    if (result.original_confidence < config.tau) return finish("already_below_tau");

    const PreparedPerturbation prepared(image, op);
    // Dilation distributes over union, so per-segment dilated masks compose.
    std::vector<std::vector<std::size_t>> seg_mask(result.region.size());
    for (std::size_t i = 0; i < result.region.size(); ++i) {
      const int id = result.region[i];
      const auto m = perturbation_mask(segmap, std::span(&id, 1), op.mask_dilation_px);
      for (std::size_t p = 0; p < m.size(); ++p) {
        if (m[p]) seg_mask[i].push_back(p);
      }
    }
    Grid<std::uint8_t> current(image.height(), image.width(), 0);
    std::size_t current_count = 0;
    std::vector<std::uint8_t> used(result.region.size(), 0);
    const std::size_t batch = detector.config().batch_limit;

    for (int iter = 0; iter < config.max_iterations; ++iter) {
      std::vector<std::size_t> candidates;
      for (std::size_t i = 0; i < result.region.size(); ++i) {
        if (used[i]) continue;
        const bool adds = std::any_of(seg_mask[i].begin(), seg_mask[i].end(),
                                      [&](std::size_t p) { return current[p] == 0; });
        if (adds) candidates.push_back(i);
      }
      if (candidates.empty()) return finish("region_exhausted");

      std::vector<double> conf(candidates.size(), 0.0);
      std::vector<ImageBuffer> images;
      for (std::size_t start = 0; start < candidates.size(); start += batch) {
        const std::size_t stop = std::min(candidates.size(), start + batch);
        images.clear();
        for (std::size_t c = start; c < stop; ++c) {
          Grid<std::uint8_t> mask = current;
          for (std::size_t p : seg_mask[candidates[c]]) mask[p] = 1;
          images.push_back(prepared.apply(mask));
        }
        const auto sets = detector.detect(images);
        for (std::size_t c = start; c < stop; ++c) {
          conf[c] = matched_confidence(target, sets[c - start], config.delta);
        }
      }

      std::size_t best = 0;
      for (std::size_t c = 1; c < candidates.size(); ++c) {
        const int id_c = result.region[candidates[c]];
        const int id_b = result.region[candidates[best]];
        const int area_c = segmap.segment(id_c).area;
        const int area_b = segmap.segment(id_b).area;
        if (conf[c] < conf[best] || (conf[c] == conf[best] &&
                                     (area_c < area_b || (area_c == area_b && id_c < id_b)))) {
          best = c;
        }
      }
      const std::size_t chosen = candidates[best];
      used[chosen] = 1;
      for (std::size_t p : seg_mask[chosen]) {
        if (!current[p]) {
          current[p] = 1;
          ++current_count;
        }
      }
      result.selected_segments.push_back(result.region[chosen]);
      result.confidence_trace.push_back(conf[best]);
      result.area_trace.push_back(static_cast<double>(current_count) / total_px);
      if (conf[best] < config.tau) return finish("flipped");
    }
    return finish("max_iterations");
  } catch (const AdapterError& e) {
    throw DeletionAborted(std::string("deletion search aborted: ") + e.what(), finish("aborted"));
  }
}

json perturbation_op_to_json(const PerturbationOp& op) {
  return {{"kind", to_string(op.kind)},
          {"blur_sigma", op.blur_sigma},
          {"noise_level", op.noise_level},
          {"mask_dilation_px", op.mask_dilation_px},
          {"noise_seed", op.noise_seed}};
}

PerturbationOp perturbation_op_from_json(const json& j) {
  PerturbationOp op;
  if (j.is_string()) {
    op.kind = perturbation_kind_from_string(j.get<std::string>());
    return op;
  }
  op.kind = perturbation_kind_from_string(j.value("kind", std::string("mask_mean")));
  op.blur_sigma = j.value("blur_sigma", op.blur_sigma);
  op.noise_level = j.value("noise_level", op.noise_level);
  op.mask_dilation_px = j.value("mask_dilation_px", op.mask_dilation_px);
  op.noise_seed = j.value("noise_seed", op.noise_seed);
  op.validate();
  return op;
}

json search_config_to_json(const SearchConfig& c) {
  return {{"tau", c.tau},
          {"delta", c.delta},
          {"max_iterations", c.max_iterations},
          {"ring_fraction", c.ring_fraction},
          {"min_ring_px", c.min_ring_px},
          {"min_region_segments", c.min_region_segments}};
}

SearchConfig search_config_from_json(const json& j) {
  SearchConfig c;
  c.tau = j.value("tau", c.tau);
  c.delta = j.value("delta", c.delta);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.ring_fraction = j.value("ring_fraction", c.ring_fraction);
  c.min_ring_px = j.value("min_ring_px", c.min_ring_px);
  c.min_region_segments = j.value("min_region_segments", c.min_region_segments);
  c.validate();
  return c;
}

json perturbation_result_to_json(const PerturbationResult& r) {
  const auto& b = r.target.box;
  return {{"version", 1},
          {"target",
           {{"box", {b.x_min(), b.y_min(), b.x_max(), b.y_max()}},
            {"class", r.target.class_id},
            {"score", r.target.score}}},
          {"op", perturbation_op_to_json(r.op)},
          {"config", search_config_to_json(r.config)},
          {"region", r.region},
          {"original_confidence", r.original_confidence},
          {"selected_segments", r.selected_segments},
          {"confidence_trace", r.confidence_trace},
          {"area_trace", r.area_trace},
          {"final_confidence", r.final_confidence},
          {"flipped", r.flipped},
          {"zero_suppressed", r.zero_suppressed},
          {"area_fraction", r.area_fraction},
          {"iterations", r.iterations},
          {"stop_reason", r.stop_reason}};
}

PerturbationResult perturbation_result_from_json(const json& j) {
  PerturbationResult r;
  const auto& t = j.at("target");
  const auto& b = t.at("box");
  r.target = Detection(Box(b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                           b.at(3).get<double>()),
                       t.at("class").get<int>(), t.at("score").get<double>());
  r.op = perturbation_op_from_json(j.at("op"));
  r.config = search_config_from_json(j.at("config"));
  r.region = j.at("region").get<std::vector<int>>();
  r.original_confidence = j.at("original_confidence").get<double>();
  r.selected_segments = j.at("selected_segments").get<std::vector<int>>();
  r.confidence_trace = j.at("confidence_trace").get<std::vector<double>>();
  r.area_trace = j.at("area_trace").get<std::vector<double>>();
  r.final_confidence = j.at("final_confidence").get<double>();
  r.flipped = j.at("flipped").get<bool>();
  r.zero_suppressed = j.at("zero_suppressed").get<bool>();
  r.area_fraction = j.at("area_fraction").get<double>();
  r.iterations = j.at("iterations").get<int>();
  r.stop_reason = j.at("stop_reason").get<std::string>();
  return r;
}

}  // namespace detxai
