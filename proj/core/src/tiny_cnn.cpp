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
#include "detxai/tiny_cnn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "detxai/errors.hpp"

namespace detxai {
namespace {

constexpr int kP = TinyCnnWeights::kPatch;
constexpr double kLuma[3] = {0.299, 0.587, 0.114};

struct Cell {
  int u;
  int v;
};

int cell_count(int pixels) { return (pixels + kP - 1) / kP; }

double cell_center(int index, int pixels) {
  return 0.5 * (index * kP + std::min((index + 1) * kP, pixels));
}

std::vector<Cell> covered_cells(const Box& box, int image_height, int image_width) {
  std::vector<Cell> cells;
  for (int u = 0; u < cell_count(image_height); ++u) {
    const double cy = cell_center(u, image_height);
    if (cy < box.y_min() || cy >= box.y_max()) continue;
    for (int v = 0; v < cell_count(image_width); ++v) {
      const double cx = cell_center(v, image_width);
      if (cx >= box.x_min() && cx < box.x_max()) cells.push_back({u, v});
    }
  }
  if (cells.empty()) throw InvalidArgument("box covers no feature cells");
  return cells;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Softmax weights over the covered cells and the resulting log-mean-exp.
std::pair<std::vector<double>, double> soft_pool(const RawMap& z, const std::vector<Cell>& cells) {
  double zmax = -std::numeric_limits<double>::infinity();
  for (const auto& c : cells) zmax = std::max(zmax, z.at(c.u, c.v));
  std::vector<double> p(cells.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    p[i] = std::exp(z.at(cells[i].u, cells[i].v) - zmax);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  const double value = zmax + std::log(sum / static_cast<double>(cells.size()));
  return {std::move(p), value};
}

}  // namespace

TinyCnnWeights TinyCnnWeights::dark_blob() {
  TinyCnnWeights w;
  w.channels = 4;
  w.conv.assign(static_cast<std::size_t>(w.channels) * 3 * kP * kP, 0.0);
  w.conv_bias = {0.7, -0.7, 0.0, 0.0};
  w.head.assign(static_cast<std::size_t>(w.channels) * kHead * kHead, 0.0);
  auto conv = [&](int k, int c, int dy, int dx) -> double& {
    return w.conv[((static_cast<std::size_t>(k) * 3 + c) * kP + dy) * kP + dx];
  };
  constexpr double kArea = kP * kP;
  for (int c = 0; c < 3; ++c) {
    for (int dy = 0; dy < kP; ++dy) {
      for (int dx = 0; dx < kP; ++dx) {
        conv(0, c, dy, dx) = -kLuma[c] / kArea;  // darkness below 0.7
        conv(1, c, dy, dx) = kLuma[c] / kArea;   // brightness above 0.7
        conv(3, c, dy, dx) = (dx < kP / 2 ? 2.0 : -2.0) * kLuma[c] / kArea;  // left-right edge
      }
    }
  }
  for (int dy = 0; dy < kP; ++dy) {
    for (int dx = 0; dx < kP; ++dx) {
      conv(2, 0, dy, dx) = 1.0 / kArea;  // warm: red minus blue
      conv(2, 2, dy, dx) = -1.0 / kArea;
    }
  }
  auto head = [&](int k, int i, int j) -> double& {
    return w.head[(static_cast<std::size_t>(k) * kHead + i) * kHead + j];
  };
  const double darkness[3][3] = {{0.4, 1.0, 0.4}, {1.0, 3.0, 1.0}, {0.4, 1.0, 0.4}};
  for (int i = 0; i < kHead; ++i) {
    for (int j = 0; j < kHead; ++j) head(0, i, j) = darkness[i][j];
  }
  head(1, 1, 1) = -2.0;
  head(2, 1, 1) = -0.5;
  head(3, 1, 1) = 0.3;
  w.head_bias = -1.3;
  return w;
}

TinyCnnWeights TinyCnnWeights::random(int channels, std::uint64_t seed) {
  TinyCnnWeights w;
  w.channels = channels;
  std::mt19937_64 rng(seed);
  auto uniform = [&rng] {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  };
  w.conv.resize(static_cast<std::size_t>(channels) * 3 * kP * kP);
  for (double& x : w.conv) x = uniform();
  w.conv_bias.resize(channels);
  for (double& x : w.conv_bias) x = 0.5 * uniform();
  w.head.resize(static_cast<std::size_t>(channels) * kHead * kHead);
  for (double& x : w.head) x = uniform();
  w.head_bias = uniform();
  return w;
}

void TinyCnnWeights::validate() const {
  if (channels < 1) throw InvalidArgument("tinycnn needs at least one channel");
  if (conv.size() != static_cast<std::size_t>(channels) * 3 * kP * kP ||
      conv_bias.size() != static_cast<std::size_t>(channels) ||
      head.size() != static_cast<std::size_t>(channels) * kHead * kHead) {
    throw InvalidArgument("tinycnn weight shapes do not match the channel count");
  }
}

TinyCnnDetector::TinyCnnDetector(DetectorConfig config, TinyCnnWeights weights, int class_id)
    : Detector(std::move(config)), weights_(std::move(weights)), class_id_(class_id) {
  weights_.validate();
}

FeatureTensor TinyCnnDetector::features(const ImageBuffer& image) const {
  const int U = cell_count(image.height());
  const int V = cell_count(image.width());
  FeatureTensor a(weights_.channels, U, V);
  for (int k = 0; k < weights_.channels; ++k) {
    for (int u = 0; u < U; ++u) {
      for (int v = 0; v < V; ++v) {
        double acc = weights_.conv_bias[k];
        for (int dy = 0; dy < kP; ++dy) {
          const int r = u * kP + dy;
          if (r >= image.height()) break;
          for (int dx = 0; dx < kP; ++dx) {
            const int c = v * kP + dx;
            if (c >= image.width()) break;
            for (int ch = 0; ch < 3; ++ch) acc += weights_.conv_at(k, ch, dy, dx) * image.at(r, c, ch);
          }
        }
        a.at(k, u, v) = std::max(acc, 0.0);
      }
    }
  }
  return a;
}

RawMap TinyCnnDetector::logits(const FeatureTensor& a) const {
  if (a.channels() != weights_.channels) throw InvalidArgument("feature channel count mismatch");
  RawMap z(a.height(), a.width(), weights_.head_bias);
  for (int u = 0; u < a.height(); ++u) {
    for (int v = 0; v < a.width(); ++v) {
      double acc = weights_.head_bias;
      for (int k = 0; k < a.channels(); ++k) {
        for (int i = -1; i <= 1; ++i) {
          const int uu = u + i;
          if (uu < 0 || uu >= a.height()) continue;
          for (int j = -1; j <= 1; ++j) {
            const int vv = v + j;
            if (vv < 0 || vv >= a.width()) continue;
            acc += weights_.head_at(k, i + 1, j + 1) * a.at(k, uu, vv);
          }
        }
      }
      z.at(u, v) = acc;
    }
  }
  return z;
}

double TinyCnnDetector::target_logit(const FeatureTensor& a, const Box& box, int image_height,
                                     int image_width) const {
  return soft_pool(logits(a), covered_cells(box, image_height, image_width)).second;
}

FeatureTensor TinyCnnDetector::target_gradient(const FeatureTensor& a, const Box& box,
                                               int image_height, int image_width) const {
  const auto cells = covered_cells(box, image_height, image_width);
  const auto [p, value] = soft_pool(logits(a), cells);
  FeatureTensor g(a.channels(), a.height(), a.width(), 0.0);
  // z(u,v) depends on A(k, u+i, v+j) through head(k, i+1, j+1).
  for (std::size_t n = 0; n < cells.size(); ++n) {
    const auto [u, v] = cells[n];
    for (int k = 0; k < a.channels(); ++k) {
      for (int i = -1; i <= 1; ++i) {
        const int uu = u + i;
        if (uu < 0 || uu >= a.height()) continue;
        for (int j = -1; j <= 1; ++j) {
          const int vv = v + j;
          if (vv < 0 || vv >= a.width()) continue;
          g.at(k, uu, vv) += p[n] * weights_.head_at(k, i + 1, j + 1);
        }
      }
    }
  }
  return g;
}

DetectionSet TinyCnnDetector::detect_image(const ImageBuffer& image) const {
  const FeatureTensor a = features(image);
  const RawMap z = logits(a);
  const int U = z.height();
  const int V = z.width();
  Grid<int> comp(U, V, -1);
  std::vector<Detection> out;
  int next = 0;
  std::vector<Cell> stack;
  for (int u0 = 0; u0 < U; ++u0) {
    for (int v0 = 0; v0 < V; ++v0) {
      if (z.at(u0, v0) <= 0.0 || comp.at(u0, v0) >= 0) continue;
      int umin = u0, umax = u0, vmin = v0, vmax = v0;
      stack.assign(1, {u0, v0});
      comp.at(u0, v0) = next;
      while (!stack.empty()) {
        const Cell c = stack.back();
        stack.pop_back();
        umin = std::min(umin, c.u);
        umax = std::max(umax, c.u);
        vmin = std::min(vmin, c.v);
        vmax = std::max(vmax, c.v);
        const Cell nb[4] = {{c.u - 1, c.v}, {c.u + 1, c.v}, {c.u, c.v - 1}, {c.u, c.v + 1}};
        for (const Cell& n : nb) {
          if (n.u < 0 || n.u >= U || n.v < 0 || n.v >= V) continue;
          if (z.at(n.u, n.v) <= 0.0 || comp.at(n.u, n.v) >= 0) continue;
          comp.at(n.u, n.v) = next;
          stack.push_back(n);
        }
      }
      ++next;
      const Box box(vmin * kP, umin * kP, std::min((vmax + 1) * kP, image.width()),
                    std::min((umax + 1) * kP, image.height()));
      const double logit = soft_pool(z, covered_cells(box, image.height(), image.width())).second;
      out.emplace_back(box, class_id_, sigmoid(logit));
    }
  }
  return DetectionSet("", std::move(out));
}

std::vector<DetectionSet> TinyCnnDetector::run_detect(std::span<const ImageBuffer> images) {
  std::vector<DetectionSet> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(detect_image(img));
  return out;
}

IntrospectionResult TinyCnnDetector::introspect(const ImageBuffer& image, const Detection& target,
                                                std::string_view layer) {
  if (!layer.empty() && layer != kFeatureLayer) {
    throw AdapterError("tinycnn exposes no layer named '" + std::string(layer) + "'");
  }
  const DetectionSet dets = detect_image(image);
  std::optional<std::size_t> index;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].box == target.box && dets[i].class_id == target.class_id) {
      index = i;
      break;
    }
  }
  if (!index) index = match_index(target, dets, 0.5);
  if (!index) throw InvalidArgument("introspection target was not produced by this detector");

  IntrospectionResult result;
  result.activations = features(image);
  const Box& box = dets[*index].box;
  result.gradients = target_gradient(result.activations, box, image.height(), image.width());
  result.target_value = target_logit(result.activations, box, image.height(), image.width());
  result.target_detection_index = *index;
  return result;
}

}  // namespace detxai
