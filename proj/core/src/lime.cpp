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
#include "detxai/lime.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "detxai/errors.hpp"
#include "detxai/random.hpp"

namespace detxai {

std::string to_string(WeightMode m) {
  switch (m) {
    case WeightMode::kConfidence: return "confidence";
    case WeightMode::kArea: return "area";
    case WeightMode::kUniform: return "uniform";
  }
  return "confidence";
}

WeightMode weight_mode_from_string(std::string_view s) {
  if (s == "confidence") return WeightMode::kConfidence;
  if (s == "area") return WeightMode::kArea;
  if (s == "uniform") return WeightMode::kUniform;
  throw InvalidArgument("unknown weighting mode '" + std::string(s) + "'");
}

InstanceWeights instance_weights(const DetectionSet& detections, WeightMode mode) {
  const std::size_t m = detections.size();
  if (m == 0) throw NoDetectionsError("instance weights need at least one detection");
  InstanceWeights out{mode, std::vector<double>(m, 1.0 / static_cast<double>(m))};
  if (mode == WeightMode::kUniform) return out;
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double v = mode == WeightMode::kConfidence ? detections[i].score : detections[i].box.area();
    if (!(v > 0.0)) {
      throw InvalidArgument(to_string(mode) + " weighting needs positive values");
    }
    out.weights[i] = v;
    total += v;
  }
  for (double& w : out.weights) w /= total;
  return out;
}

SampleMatrix::SampleMatrix(int columns, std::vector<std::uint8_t> rows_flat)
    : cols_(columns), data_(std::move(rows_flat)) {
  if (columns < 1) throw InvalidArgument("sample matrix needs at least one column");
  if (data_.empty() || data_.size() % static_cast<std::size_t>(columns) != 0) {
    throw InvalidArgument("sample matrix data does not fill whole rows");
  }
  for (int j = 0; j < cols_; ++j) {
    if (data_[j] != 1) throw InvalidArgument("sample matrix row 0 must keep every segment");
  }
  for (int i = 0; i < rows(); ++i) {
    if (kept(i) == 0) throw InvalidArgument("every sample must keep at least one segment");
  }
}

int SampleMatrix::kept(int i) const {
  int n = 0;
  for (auto v : row(i)) {
    if (v > 1) throw InvalidArgument("sample matrix entries must be 0 or 1");
    n += v;
  }
  return n;
}

void LimeParams::validate(int n_eligible) const {
  if (n_eligible < 1) throw NoEligibleRegionError("no eligible segments to perturb");
  if (n_samples < n_eligible + 1) {
    throw InvalidArgument("n_samples must be at least n_eligible + 1");
  }
  if (!(keep_probability > 0.0 && keep_probability < 1.0)) {
    throw InvalidArgument("keep_probability must lie in (0,1)");
  }
  if (kernel_width && !(*kernel_width > 0.0)) throw InvalidArgument("kernel_width must be > 0");
  if (!(ridge >= 0.0)) throw InvalidArgument("ridge must be >= 0");
  if (!(iou_match_threshold > 0.0 && iou_match_threshold < 1.0)) {
    throw InvalidArgument("iou_match_threshold must lie in (0,1)");
  }
  if (!(proximity_scale > 0.0)) throw InvalidArgument("proximity_scale must be > 0");
  if (fill) {
    for (float f : *fill) {
      if (!(f >= 0.f && f <= 1.f)) throw InvalidArgument("fill must lie in [0,1]");
    }
  }
}

double LimeParams::effective_kernel_width(int n_eligible) const {
  return kernel_width.value_or(0.25 * std::sqrt(static_cast<double>(n_eligible)));
}

SampleMatrix generate_samples(int n_eligible, const LimeParams& params) {
  params.validate(n_eligible);
  Rng rng(params.seed);
  std::vector<std::uint8_t> data(static_cast<std::size_t>(params.n_samples) * n_eligible, 0);
  std::fill_n(data.begin(), n_eligible, 1);
  for (int i = 1; i < params.n_samples; ++i) {
    auto row = std::span(data).subspan(static_cast<std::size_t>(i) * n_eligible, n_eligible);
    int kept = 0;
    do {
      kept = 0;
      for (auto& v : row) {
        v = rng.bernoulli(params.keep_probability) ? 1 : 0;
        kept += v;
      }
    } while (kept == 0);
  }
  return SampleMatrix(n_eligible, std::move(data));
}

ImageBuffer mask_sample(const ImageBuffer& image, const SegmentMap& segmap,
                        std::span<const std::uint8_t> row, std::array<float, 3> fill) {
  const std::vector<int> ids = segmap.eligible_ids();
  if (row.size() != ids.size()) {
    throw InvalidArgument("sample row length must equal the eligible segment count");
  }
  if (segmap.height() != image.height() || segmap.width() != image.width()) {
    throw InvalidArgument("segment map and image differ in shape");
  }
  ImageBuffer out = image;
  auto values = out.values();
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (row[j]) continue;
    for (std::size_t p : segmap.pixels(ids[j])) {
      for (int ch = 0; ch < 3; ++ch) values[p * 3 + ch] = fill[ch];
    }
  }
  return out;
}

double score_sample(const DetectionSet& reference, const DetectionSet& perturbed,
                    const InstanceWeights& weights, double iou_match_threshold) {
  if (weights.weights.size() != reference.size()) {
    throw InvalidArgument("instance weights do not match the reference detections");
  }
  double f = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    f += weights.weights[i] * matched_confidence(reference[i], perturbed, iou_match_threshold);
  }
  return std::clamp(f, 0.0, 1.0);
}

Surrogate fit_surrogate(const SampleMatrix& z, std::span<const double> responses,
                        double kernel_width, double ridge) {
  const int n = z.rows();
  const int p = z.cols();
  if (static_cast<int>(responses.size()) != n) {
    throw InvalidArgument("response count must equal the sample count");
  }
  for (double f : responses) {
    if (!std::isfinite(f)) throw InvalidArgument("responses must be finite");
  }
  if (!(kernel_width > 0.0)) throw InvalidArgument("kernel_width must be > 0");
  if (!(ridge >= 0.0)) throw InvalidArgument("ridge must be >= 0");

  Surrogate s;
  s.kernel_width = kernel_width;
  s.ridge = ridge;
  s.sample_weights.resize(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double cos_sim = std::sqrt(static_cast<double>(z.kept(i)) / p);
    const double d = 1.0 - cos_sim;
    s.sample_weights[i] = std::exp(-(d * d) / (kernel_width * kernel_width));
    total += s.sample_weights[i];
  }

  // Augmented least squares: weighted rows, then sqrt(ridge) rows on the slopes.
  const int extra = ridge > 0.0 ? p : 0;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + extra, p + 1);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + extra);
  for (int i = 0; i < n; ++i) {
    const double sw = std::sqrt(s.sample_weights[i] / total);
    a(i, 0) = sw;
    const auto row = z.row(i);
    for (int j = 0; j < p; ++j) a(i, j + 1) = sw * row[j];
    b(i) = sw * responses[i];
  }
  for (int j = 0; j < extra; ++j) a(n + j, j + 1) = std::sqrt(ridge);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < p + 1) {
    throw SingularSystemError("surrogate design is rank deficient; use ridge > 0");
  }
  const Eigen::VectorXd theta = qr.solve(b);
  s.intercept = theta(0);
  s.coefficients.assign(theta.data() + 1, theta.data() + 1 + p);

  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += s.sample_weights[i] * responses[i];
  mean /= total;
  double ss_res = 0.0, ss_tot = 0.0;
  for (int i = 0; i < n; ++i) {
    double pred = s.intercept;
    const auto row = z.row(i);
    for (int j = 0; j < p; ++j) pred += s.coefficients[j] * row[j];
    ss_res += s.sample_weights[i] * (responses[i] - pred) * (responses[i] - pred);
    ss_tot += s.sample_weights[i] * (responses[i] - mean) * (responses[i] - mean);
  }
  s.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res > 0.0 ? 0.0 : 1.0);
  return s;
}

ExplanationMap build_explanation_map(const Surrogate& surrogate, const SegmentMap& segmap,
                                     const DetectionSet& detections, double proximity_scale) {
  if (!(proximity_scale > 0.0)) throw InvalidArgument("proximity_scale must be > 0");
  const std::vector<int> ids = segmap.eligible_ids();
  if (surrogate.coefficients.size() != ids.size()) {
    throw InvalidArgument("surrogate was not fitted on this segment map");
  }
  const double diag = std::hypot(segmap.height(), segmap.width());
  const double sigma = proximity_scale * diag;

  std::vector<std::uint8_t> touches(segmap.segment_count(), 0);
  for (const auto& d : detections) {
    for (int id : segmap.segments_touching(d.box)) touches[id] = 1;
  }

  ExplanationMap out;
  out.segments.resize(segmap.segment_count());
  std::vector<double> value(segmap.segment_count(), 0.0);
  for (int id = 0; id < segmap.segment_count(); ++id) {
    auto& rec = out.segments[id];
    rec.id = id;
    const auto& info = segmap.segment(id);
    if (touches[id]) {
      rec.proximity = 1.0;
    } else if (detections.empty()) {
      rec.proximity = 0.0;
    } else {
      double g = std::numeric_limits<double>::infinity();
      for (const auto& d : detections) g = std::min(g, d.box.distance_to(info.centroid_x, info.centroid_y));
      rec.proximity = std::exp(-(g * g) / (2.0 * sigma * sigma));
    }
  }
  for (std::size_t j = 0; j < ids.size(); ++j) {
    auto& rec = out.segments[ids[j]];
    rec.beta = surrogate.coefficients[j];
    value[ids[j]] = std::max(*rec.beta, 0.0) * rec.proximity;
  }

  RawMap raw(segmap.height(), segmap.width(), 0.0);
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = value[segmap.labels()[i]];
  out.map = minmax_normalize(raw);
  for (int id = 0; id < segmap.segment_count(); ++id) {
    const auto& px = segmap.pixels(id);
    out.segments[id].final_value = px.empty() ? 0.0 : out.map.grid()[px.front()];
  }
  return out;
}

LimeExplanation explain_lime(Detector& detector, const ImageBuffer& image,
                             const SegmentMap& segmap, const LimeParams& params) {
  const std::vector<int> ids = segmap.eligible_ids();
  const int n_eligible = static_cast<int>(ids.size());
  params.validate(n_eligible);

  LimeExplanation out;
  out.params = params;
  out.reference = detector.detect_one(image);
  out.weights = instance_weights(out.reference, params.weight_mode);

  std::array<float, 3> fill{};
  if (params.fill) {
    fill = *params.fill;
  } else {
    const auto mean = image.channel_mean();
    for (int ch = 0; ch < 3; ++ch) fill[ch] = static_cast<float>(mean[ch]);
  }

  const SampleMatrix z = generate_samples(n_eligible, params);
  out.responses.resize(z.rows());
  const std::size_t batch = detector.config().batch_limit;
  std::vector<ImageBuffer> images;
  for (int start = 0; start < z.rows(); start += static_cast<int>(batch)) {
    const int stop = std::min(z.rows(), start + static_cast<int>(batch));
    images.clear();
    for (int i = start; i < stop; ++i) images.push_back(mask_sample(image, segmap, z.row(i), fill));
    const auto sets = detector.detect(images);
    for (int i = start; i < stop; ++i) {
      out.responses[i] = score_sample(out.reference, sets[i - start], out.weights,
                                      params.iou_match_threshold);
    }
  }

  out.surrogate = fit_surrogate(z, out.responses, params.effective_kernel_width(n_eligible),
                                params.ridge);
  out.surrogate.segment_ids = ids;
  out.explanation =
      build_explanation_map(out.surrogate, segmap, out.reference, params.proximity_scale);
  return out;
}

nlohmann::json lime_params_to_json(const LimeParams& p) {
  nlohmann::json j = {{"n_samples", p.n_samples},
                      {"keep_probability", p.keep_probability},
                      {"ridge", p.ridge},
                      {"iou_match_threshold", p.iou_match_threshold},
                      {"weight_mode", to_string(p.weight_mode)},
                      {"proximity_scale", p.proximity_scale},
                      {"seed", p.seed}};
  j["kernel_width"] = p.kernel_width ? nlohmann::json(*p.kernel_width) : nlohmann::json(nullptr);
  j["fill"] = p.fill ? nlohmann::json(std::vector<float>(p.fill->begin(), p.fill->end()))
                     : nlohmann::json("mean");
  return j;
}

LimeParams lime_params_from_json(const nlohmann::json& j) {
  LimeParams p;
  p.n_samples = j.value("n_samples", p.n_samples);
  p.keep_probability = j.value("keep_probability", p.keep_probability);
  p.ridge = j.value("ridge", p.ridge);
  p.iou_match_threshold = j.value("iou_match_threshold", p.iou_match_threshold);
  p.weight_mode = weight_mode_from_string(j.value("weight_mode", to_string(p.weight_mode)));
  p.proximity_scale = j.value("proximity_scale", p.proximity_scale);
  p.seed = j.value("seed", p.seed);
  if (j.contains("kernel_width") && !j.at("kernel_width").is_null()) {
    p.kernel_width = j.at("kernel_width").get<double>();
  }
  if (j.contains("fill") && j.at("fill").is_array()) {
    const auto v = j.at("fill").get<std::vector<float>>();
    if (v.size() != 3) throw InvalidArgument("lime fill needs three channel values");
    p.fill = std::array<float, 3>{v[0], v[1], v[2]};
  } else if (j.contains("fill") && j.at("fill") != "mean" && !j.at("fill").is_null()) {
    throw InvalidArgument("lime fill must be \"mean\" or an RGB triple");
  }
  return p;
}

nlohmann::json lime_explanation_to_json(const LimeExplanation& e) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : e.explanation.segments) {
    segs.push_back({{"id", s.id},
                    {"beta", s.beta ? nlohmann::json(*s.beta) : nlohmann::json(nullptr)},
                    {"proximity", s.proximity},
                    {"final_value", s.final_value}});
  }
  nlohmann::json dets = nlohmann::json::array();
  for (std::size_t i = 0; i < e.reference.size(); ++i) {
    const auto& d = e.reference[i];
    dets.push_back({{"box", {d.box.x_min(), d.box.y_min(), d.box.x_max(), d.box.y_max()}},
                    {"class", d.class_id},
                    {"score", d.score},
                    {"weight", e.weights.weights[i]}});
  }
  return {{"version", 1},
          {"weighting_mode", to_string(e.weights.mode)},
          {"params", lime_params_to_json(e.params)},
          {"seed", e.params.seed},
          {"intercept", e.surrogate.intercept},
          {"kernel_width", e.surrogate.kernel_width},
          {"r_squared", e.surrogate.r_squared},
          {"reference_detections", std::move(dets)},
          {"segments", std::move(segs)}};
}

}  // namespace detxai
