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
#include "detxai/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "detxai/errors.hpp"
#include "detxai/image_io.hpp"

namespace detxai {
namespace {

// D65 reference white.
constexpr double kXn = 0.95047;
constexpr double kYn = 1.0;
constexpr double kZn = 1.08883;

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double kDelta = 6.0 / 29.0;
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

struct Center {
  double l, a, b, x, y;
};

// Grid layout whose cells are closest to square with nx*ny closest to n.
std::pair<int, int> grid_layout(int n, int height, int width) {
  int best_nx = 1, best_ny = 1;
  double best_cost = std::numeric_limits<double>::infinity();
  int best_gap = std::numeric_limits<int>::max();
  for (int nx = 1; nx <= std::min(n, width); ++nx) {
    for (int ny = 1; ny <= std::min(n, height); ++ny) {
      if (nx * ny > 2 * n) break;
      const double aspect = std::abs(std::log((static_cast<double>(width) / nx) /
                                              (static_cast<double>(height) / ny)));
      const double count = std::abs(std::log(static_cast<double>(nx * ny) / n));
      const double cost = aspect + count;
      const int gap = std::abs(nx * ny - n);
      constexpr double kEps = 1e-12;
      if (cost < best_cost - kEps ||
          (std::abs(cost - best_cost) <= kEps &&
           (gap < best_gap || (gap == best_gap && nx > best_nx)))) {
        best_cost = cost;
        best_gap = gap;
        best_nx = nx;
        best_ny = ny;
      }
    }
  }
  return {best_nx, best_ny};
}

LabImage smooth(const LabImage& lab, double sigma) {
  if (sigma <= 0.0) return lab;
  cv::Mat m(lab.height(), lab.width(), CV_64FC3);
  for (int r = 0; r < lab.height(); ++r) {
    for (int c = 0; c < lab.width(); ++c) {
      const Lab& p = lab.at(r, c);
      m.at<cv::Vec3d>(r, c) = cv::Vec3d(p[0], p[1], p[2]);
    }
  }
  cv::Mat out;
  cv::GaussianBlur(m, out, cv::Size(0, 0), sigma, sigma, cv::BORDER_REFLECT_101);
  LabImage result(lab.height(), lab.width());
  for (int r = 0; r < lab.height(); ++r) {
    for (int c = 0; c < lab.width(); ++c) {
      const auto& v = out.at<cv::Vec3d>(r, c);
      result.at(r, c) = {v[0], v[1], v[2]};
    }
  }
  return result;
}

double color_gradient(const LabImage& lab, int r, int c) {
  const int h = lab.height();
  const int w = lab.width();
  auto px = [&](int rr, int cc) -> const Lab& {
    return lab.at(std::clamp(rr, 0, h - 1), std::clamp(cc, 0, w - 1));
  };
  double g = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    const double dx = px(r, c + 1)[ch] - px(r, c - 1)[ch];
    const double dy = px(r + 1, c)[ch] - px(r - 1, c)[ch];
    g += dx * dx + dy * dy;
  }
  return g;
}

// Labels 4-connected components of equal label; returns component ids and count.
std::pair<Grid<int>, int> connected_components(const Grid<int>& labels) {
  const int h = labels.height();
  const int w = labels.width();
  Grid<int> comp(h, w, -1);
  int next = 0;
  std::vector<std::pair<int, int>> stack;
  for (int r0 = 0; r0 < h; ++r0) {
    for (int c0 = 0; c0 < w; ++c0) {
      if (comp.at(r0, c0) >= 0) continue;
      const int lbl = labels.at(r0, c0);
      comp.at(r0, c0) = next;
      stack.assign(1, {r0, c0});
      while (!stack.empty()) {
        const auto [r, c] = stack.back();
        stack.pop_back();
        const std::pair<int, int> nb[4] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
        for (const auto& [rr, cc] : nb) {
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          if (comp.at(rr, cc) >= 0 || labels.at(rr, cc) != lbl) continue;
          comp.at(rr, cc) = next;
          stack.emplace_back(rr, cc);
        }
      }
      ++next;
    }
  }
  return {std::move(comp), next};
}

void enforce_connectivity(Grid<int>& labels, int label_count) {
  const int h = labels.height();
  const int w = labels.width();
  auto [comp, ncomp] = connected_components(labels);

  std::vector<int> comp_label(ncomp, -1);
  std::vector<int> comp_size(ncomp, 0);
  std::vector<std::vector<std::size_t>> comp_pixels(ncomp);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int k = comp.at(r, c);
      comp_label[k] = labels.at(r, c);
      ++comp_size[k];
      comp_pixels[k].push_back(static_cast<std::size_t>(r) * w + c);
    }
  }
  // The largest component of each label (first in scan order on ties) stays.
  std::vector<int> primary(label_count, -1);
  for (int k = 0; k < ncomp; ++k) {
    int& p = primary[comp_label[k]];
    if (p < 0 || comp_size[k] > comp_size[p]) p = k;
  }

  // Orphans join a neighbouring set of components. Merged fragments travel
  // with their host, so each final set is a primary plus adjacent orphans.
  std::vector<int> parent(ncomp);
  std::vector<int> set_size(comp_size);
  for (int k = 0; k < ncomp; ++k) parent[k] = k;
  auto find = [&](int k) {
    while (parent[k] != k) k = parent[k] = parent[parent[k]];
    return k;
  };

  // Components are numbered in scan order, so this visits orphans row-major.
  for (int k = 0; k < ncomp; ++k) {
    if (primary[comp_label[k]] == k) continue;
    const int self = find(k);
    int target = -1;
    for (std::size_t idx : comp_pixels[k]) {
      const int r = static_cast<int>(idx / w);
      const int c = static_cast<int>(idx % w);
      const std::pair<int, int> nb[4] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
      for (const auto& [rr, cc] : nb) {
        if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
        const int other = find(comp.at(rr, cc));
        if (other == self) continue;
        if (target < 0 || set_size[other] > set_size[target] ||
            (set_size[other] == set_size[target] && comp_label[other] < comp_label[target])) {
          target = other;
        }
      }
    }
    if (target < 0) continue;
    parent[self] = target;
    set_size[target] += set_size[self];
  }
  for (int k = 0; k < ncomp; ++k) {
    const int lbl = comp_label[find(k)];
    for (std::size_t idx : comp_pixels[k]) labels[idx] = lbl;
  }
}

// Renumbers labels 0..n-1 in order of first appearance; returns n.
int relabel_contiguous(Grid<int>& labels) {
  std::map<int, int> remap;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = remap.try_emplace(labels[i], static_cast<int>(remap.size()));
    labels[i] = it->second;
  }
  return static_cast<int>(remap.size());
}

}  // namespace

Lab srgb_to_lab(double r, double g, double b) {
  const double rl = srgb_to_linear(r);
  const double gl = srgb_to_linear(g);
  const double bl = srgb_to_linear(b);
  const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
  const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
  const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
  const double fx = lab_f(x / kXn);
  const double fy = lab_f(y / kYn);
  const double fz = lab_f(z / kZn);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

LabImage to_lab(const ImageBuffer& image) {
  LabImage out(image.height(), image.width());
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c) {
      out.at(r, c) = srgb_to_lab(image.at(r, c, 0), image.at(r, c, 1), image.at(r, c, 2));
    }
  }
  return out;
}

void SlicParams::validate() const {
  if (n_segments < 2) throw InvalidArgument("n_segments must be >= 2");
  if (!(compactness > 0.0)) throw InvalidArgument("compactness must be > 0");
  if (!(smoothing_sigma >= 0.0)) throw InvalidArgument("smoothing_sigma must be >= 0");
  if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
}

SegmentMap::SegmentMap(Grid<int> labels, const LabImage& lab) : labels_(std::move(labels)) {
  if (!labels_.same_shape(Grid<int>(lab.height(), lab.width()))) {
    throw InvalidArgument("label grid and LAB image differ in shape");
  }
  int n = 0;
  for (int v : labels_.values()) {
    if (v < 0) throw InvalidArgument("segment labels must be non-negative");
    n = std::max(n, v + 1);
  }
  segments_.assign(static_cast<std::size_t>(n), SegmentInfo{});
  std::vector<Lab> sum(n, Lab{0.0, 0.0, 0.0});
  std::vector<double> sx(n, 0.0), sy(n, 0.0);
  for (int r = 0; r < height(); ++r) {
    for (int c = 0; c < width(); ++c) {
      const int id = labels_.at(r, c);
      auto& s = segments_[id];
      ++s.area;
      for (int ch = 0; ch < 3; ++ch) sum[id][ch] += lab.at(r, c)[ch];
      sx[id] += c + 0.5;
      sy[id] += r + 0.5;
    }
  }
  for (int id = 0; id < n; ++id) {
    auto& s = segments_[id];
    if (s.area == 0) throw InvalidArgument("segment labels must be contiguous");
    for (int ch = 0; ch < 3; ++ch) s.mean_lab[ch] = sum[id][ch] / s.area;
    s.centroid_x = sx[id] / s.area;
    s.centroid_y = sy[id] / s.area;
  }
  index_pixels();
}

void SegmentMap::index_pixels() {
  pixels_.assign(segments_.size(), {});
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    pixels_[static_cast<std::size_t>(labels_[i])].push_back(i);
  }
}

std::vector<int> SegmentMap::eligible_ids() const {
  std::vector<int> ids;
  for (int id = 0; id < segment_count(); ++id) {
    if (segments_[id].eligible) ids.push_back(id);
  }
  return ids;
}

std::set<int> SegmentMap::segments_touching(const Box& box) const {
  std::set<int> out;
  const int r0 = std::max(0, static_cast<int>(std::floor(box.y_min() - 0.5)));
  const int r1 = std::min(height() - 1, static_cast<int>(std::ceil(box.y_max())));
  const int c0 = std::max(0, static_cast<int>(std::floor(box.x_min() - 0.5)));
  const int c1 = std::min(width() - 1, static_cast<int>(std::ceil(box.x_max())));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      if (box.covers_pixel(r, c)) out.insert(labels_.at(r, c));
    }
  }
  return out;
}

bool operator==(const SegmentMap& a, const SegmentMap& b) {
  if (!(a.labels_ == b.labels_) || a.segments_.size() != b.segments_.size()) return false;
  for (std::size_t i = 0; i < a.segments_.size(); ++i) {
    const auto& x = a.segments_[i];
    const auto& y = b.segments_[i];
    if (x.area != y.area || x.eligible != y.eligible || x.mean_lab != y.mean_lab ||
        x.centroid_x != y.centroid_x || x.centroid_y != y.centroid_y) {
      return false;
    }
  }
  return true;
}

SegmentMap slic(const LabImage& lab_in, const SlicParams& params) {
  params.validate();
  const int h = lab_in.height();
  const int w = lab_in.width();
  const LabImage lab = smooth(lab_in, params.smoothing_sigma);
  const double S = std::sqrt(static_cast<double>(h) * w / params.n_segments);
  const double m = params.compactness;
  const double spatial = (m / S) * (m / S);

  const auto [nx, ny] = grid_layout(params.n_segments, h, w);
  const double step_x = static_cast<double>(w) / nx;
  const double step_y = static_cast<double>(h) / ny;

  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      int r = std::min(h - 1, static_cast<int>((j + 0.5) * step_y));
      int c = std::min(w - 1, static_cast<int>((i + 0.5) * step_x));
      // Move the seed to the lowest colour gradient in its 3x3 neighbourhood.
      double best = color_gradient(lab, r, c);
      int br = r, bc = c;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          const double g = color_gradient(lab, rr, cc);
          if (g < best) {
            best = g;
            br = rr;
            bc = cc;
          }
        }
      }
      const Lab& p = lab.at(br, bc);
      centers.push_back({p[0], p[1], p[2], bc + 0.5, br + 0.5});
    }
  }

  const double reach = std::max({S, step_x, step_y});
  Grid<int> labels(h, w, -1);
  Grid<double> dist(h, w, std::numeric_limits<double>::infinity());
  auto distance = [&](const Center& ctr, int r, int c) {
    const Lab& p = lab.at(r, c);
    const double dl = p[0] - ctr.l, da = p[1] - ctr.a, db = p[2] - ctr.b;
    const double dx = c + 0.5 - ctr.x, dy = r + 0.5 - ctr.y;
    return dl * dl + da * da + db * db + (dx * dx + dy * dy) * spatial;
  };

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    std::fill(dist.values().begin(), dist.values().end(), std::numeric_limits<double>::infinity());
    std::fill(labels.values().begin(), labels.values().end(), -1);
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const Center& ctr = centers[k];
      const int r0 = std::max(0, static_cast<int>(std::floor(ctr.y - reach)));
      const int r1 = std::min(h - 1, static_cast<int>(std::ceil(ctr.y + reach)));
      const int c0 = std::max(0, static_cast<int>(std::floor(ctr.x - reach)));
      const int c1 = std::min(w - 1, static_cast<int>(std::ceil(ctr.x + reach)));
      for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
          const double d = distance(ctr, r, c);
          if (d < dist.at(r, c)) {
            dist.at(r, c) = d;
            labels.at(r, c) = static_cast<int>(k);
          }
        }
      }
    }
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (labels.at(r, c) >= 0) continue;
        for (std::size_t k = 0; k < centers.size(); ++k) {
          const double d = distance(centers[k], r, c);
          if (d < dist.at(r, c)) {
            dist.at(r, c) = d;
            labels.at(r, c) = static_cast<int>(k);
          }
        }
      }
    }
    std::vector<Center> sums(centers.size(), Center{0, 0, 0, 0, 0});
    std::vector<int> counts(centers.size(), 0);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const int k = labels.at(r, c);
        const Lab& p = lab.at(r, c);
        sums[k].l += p[0];
        sums[k].a += p[1];
        sums[k].b += p[2];
        sums[k].x += c + 0.5;
        sums[k].y += r + 0.5;
        ++counts[k];
      }
    }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (counts[k] == 0) continue;
      const double n = counts[k];
      centers[k] = {sums[k].l / n, sums[k].a / n, sums[k].b / n, sums[k].x / n, sums[k].y / n};
    }
  }

  enforce_connectivity(labels, static_cast<int>(centers.size()));
  relabel_contiguous(labels);
  return SegmentMap(std::move(labels), lab_in);
}

SegmentMap filter_segments(SegmentMap segmap, double min_area_fraction,
                           double black_lightness_threshold) {
  if (!(min_area_fraction >= 0.0) || !(black_lightness_threshold >= 0.0)) {
    throw InvalidArgument("segment filter thresholds must be >= 0");
  }
  const double min_area = min_area_fraction * segmap.height() * segmap.width();
  for (int id = 0; id < segmap.segment_count(); ++id) {
    const auto& s = segmap.segment(id);
    segmap.set_eligible(id, !(s.area < min_area) && !(s.mean_lab[0] < black_lightness_threshold));
  }
  return segmap;
}

nlohmann::json segment_map_sidecar(const SegmentMap& segmap) {
  nlohmann::json segs = nlohmann::json::array();
  for (int id = 0; id < segmap.segment_count(); ++id) {
    const auto& s = segmap.segment(id);
    segs.push_back({{"id", id},
                    {"area", s.area},
                    {"mean_lab", {s.mean_lab[0], s.mean_lab[1], s.mean_lab[2]}},
                    {"centroid", {s.centroid_x, s.centroid_y}},
                    {"eligible", s.eligible}});
  }
  return {{"version", 1},
          {"height", segmap.height()},
          {"width", segmap.width()},
          {"segment_count", segmap.segment_count()},
          {"segments", std::move(segs)}};
}

void save_segment_map(const SegmentMap& segmap, const std::filesystem::path& png_path,
                      const std::filesystem::path& json_path) {
  if (segmap.segment_count() > 65536) throw InvalidArgument("too many segments for 16-bit PNG");
  cv::Mat m(segmap.height(), segmap.width(), CV_16UC1);
  for (int r = 0; r < segmap.height(); ++r) {
    for (int c = 0; c < segmap.width(); ++c) {
      m.at<std::uint16_t>(r, c) = static_cast<std::uint16_t>(segmap.label(r, c));
    }
  }
  std::vector<std::uint8_t> bytes;
  if (!cv::imencode(".png", m, bytes)) throw IoError("PNG encoding failed");
  write_file_bytes(png_path, bytes);
  write_text_file(json_path, segment_map_sidecar(segmap).dump(2) + "\n");
}

SegmentMap load_segment_map(const std::filesystem::path& png_path,
                            const std::filesystem::path& json_path) {
  cv::Mat m = cv::imread(png_path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  if (m.empty() || m.depth() != CV_16U) throw IoError("cannot read label PNG: " + png_path.string());
  const auto side = nlohmann::json::parse(read_text_file(json_path));
  SegmentMap out;
  out.labels_ = Grid<int>(m.rows, m.cols, 0);
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) out.labels_.at(r, c) = m.at<std::uint16_t>(r, c);
  }
  for (const auto& s : side.at("segments")) {
    SegmentInfo info;
    info.area = s.at("area").get<int>();
    const auto lab = s.at("mean_lab").get<std::vector<double>>();
    info.mean_lab = {lab.at(0), lab.at(1), lab.at(2)};
    info.centroid_x = s.at("centroid").at(0).get<double>();
    info.centroid_y = s.at("centroid").at(1).get<double>();
    info.eligible = s.at("eligible").get<bool>();
    out.segments_.push_back(info);
  }
  if (static_cast<int>(out.segments_.size()) != side.at("segment_count").get<int>()) {
    throw IoError("segment sidecar count mismatch");
  }
  for (int v : out.labels_.values()) {
    if (v >= out.segment_count()) throw IoError("label PNG references unknown segment");
  }
  out.index_pixels();
  return out;
}

}  // namespace detxai
