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
#include "detxai/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <tuple>

#include <opencv2/imgcodecs.hpp>

#include "detxai/encoding.hpp"
#include "detxai/errors.hpp"
#include "detxai/image_io.hpp"

namespace detxai {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Box corners before class assignment and clamping.
struct RawBox {
  double x0, y0, x1, y1;
  std::string label;
  std::string source;
  std::string item;
};

struct RawImage {
  std::string file_name;
  std::string source;
  std::vector<RawBox> boxes;
};

bool annotation_less(const AnnotationBox& a, const AnnotationBox& b) {
  return std::make_tuple(a.class_id, a.box.x_min(), a.box.y_min(), a.box.x_max(), a.box.y_max()) <
         std::make_tuple(b.class_id, b.box.x_min(), b.box.y_min(), b.box.x_max(), b.box.y_max());
}

bool is_coco(const json& j) {
  return j.is_object() && j.contains("images") && j.contains("annotations");
}

void parse_labelme(const json& j, const std::string& source, std::vector<RawImage>& images,
                   std::vector<ValidationEntry>& report) {
  RawImage img;
  img.source = source;
  // Labelme stores the path relative to the JSON file, sometimes with
  // Windows separators; images are looked up by name in image_dir.
  std::string image_path = j.at("imagePath").get<std::string>();
  std::replace(image_path.begin(), image_path.end(), '\\', '/');
  img.file_name = fs::path(image_path).filename().string();
  const auto shapes = j.value("shapes", json::array());
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& s = shapes[i];
    const std::string item = "shape:" + std::to_string(i);
    try {
      const auto type = s.value("shape_type", std::string("rectangle"));
      if (type != "rectangle") {
        report.push_back({source, item, "skipped", "unsupported shape_type " + type});
        continue;
      }
      const auto& pts = s.at("points");
      if (!pts.is_array() || pts.size() != 2) {
        report.push_back({source, item, "skipped", "rectangle needs exactly two points"});
        continue;
      }
      const double xa = pts[0].at(0), ya = pts[0].at(1), xb = pts[1].at(0), yb = pts[1].at(1);
      img.boxes.push_back({std::min(xa, xb), std::min(ya, yb), std::max(xa, xb), std::max(ya, yb),
                           s.at("label").get<std::string>(), source, item});
    } catch (const json::exception& e) {
      report.push_back({source, item, "skipped", std::string("malformed shape: ") + e.what()});
    }
  }
  images.push_back(std::move(img));
}

void parse_coco(const json& j, const std::string& source, std::vector<RawImage>& images,
                std::vector<ValidationEntry>& report) {
  std::map<long long, std::string> categories;
  for (const auto& c : j.value("categories", json::array())) {
    categories[c.at("id").get<long long>()] = c.at("name").get<std::string>();
  }
  std::map<long long, std::size_t> by_id;
  for (const auto& im : j.at("images")) {
    by_id[im.at("id").get<long long>()] = images.size();
    images.push_back({im.at("file_name").get<std::string>(), source, {}});
  }
  const auto& anns = j.at("annotations");
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const auto& a = anns[i];
    const std::string item = "annotation:" + (a.contains("id") ? a.at("id").dump() : std::to_string(i));
    try {
      const auto img = by_id.find(a.at("image_id").get<long long>());
      if (img == by_id.end()) {
        report.push_back({source, item, "skipped", "unknown image_id"});
        continue;
      }
      const auto cat = categories.find(a.at("category_id").get<long long>());
      if (cat == categories.end()) {
        report.push_back({source, item, "skipped", "unknown category_id"});
        continue;
      }
      const auto& bb = a.at("bbox");
      if (!bb.is_array() || bb.size() != 4) {
        report.push_back({source, item, "skipped", "bbox must be [x, y, w, h]"});
        continue;
      }
      const double x = bb[0], y = bb[1], w = bb[2], h = bb[3];
      images[img->second].boxes.push_back({x, y, x + w, y + h, cat->second, source, item});
    } catch (const json::exception& e) {
      report.push_back({source, item, "skipped", std::string("malformed annotation: ") + e.what()});
    }
  }
}

std::optional<fs::path> sibling_image(const fs::path& annotation, const fs::path& image_dir) {
  for (const char* ext : {".png", ".jpg", ".jpeg", ".tif", ".tiff"}) {
    auto p = image_dir / (annotation.stem().string() + ext);
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

}  // namespace

const DatasetImage* Dataset::find(const std::string& id) const {
  auto it = std::lower_bound(images.begin(), images.end(), id,
                             [](const DatasetImage& im, const std::string& key) { return im.id < key; });
  return it != images.end() && it->id == id ? &*it : nullptr;
}

std::size_t Dataset::annotation_count() const {
  std::size_t n = 0;
  for (const auto& im : images) n += im.annotations.size();
  return n;
}

json Dataset::to_json() const {
  json imgs = json::array();
  for (const auto& im : images) {
    json anns = json::array();
    for (const auto& a : im.annotations) {
      anns.push_back({{"box", {a.box.x_min(), a.box.y_min(), a.box.x_max(), a.box.y_max()}},
                      {"class_id", a.class_id}});
    }
    imgs.push_back({{"id", im.id},
                    {"path", im.path.generic_string()},
                    {"width", im.width},
                    {"height", im.height},
                    {"annotations", std::move(anns)}});
  }
  return {{"schema", "detxai.dataset"},
          {"version", 1},
          {"split", split},
          {"classes", class_names},
          {"tile", {{"width", tile_width}, {"height", tile_height}}},
          {"images", std::move(imgs)}};
}

Dataset Dataset::from_json(const json& j) {
  try {
    if (j.at("schema") != "detxai.dataset" || j.at("version") != 1) {
      throw IngestError("not a version 1 dataset file");
    }
    Dataset d;
    d.split = j.at("split").get<std::string>();
    d.class_names = j.at("classes").get<std::vector<std::string>>();
    d.tile_width = j.at("tile").at("width").get<int>();
    d.tile_height = j.at("tile").at("height").get<int>();
    for (const auto& im : j.at("images")) {
      DatasetImage out;
      out.id = im.at("id").get<std::string>();
      out.path = im.at("path").get<std::string>();
      out.width = im.at("width").get<int>();
      out.height = im.at("height").get<int>();
      for (const auto& a : im.at("annotations")) {
        const auto& b = a.at("box");
        out.annotations.push_back({Box(b.at(0), b.at(1), b.at(2), b.at(3)), a.at("class_id").get<int>()});
      }
      d.images.push_back(std::move(out));
    }
    return d;
  } catch (const json::exception& e) {
    throw IngestError(std::string("malformed dataset file: ") + e.what());
  }
}

json IngestResult::report_json() const {
  json entries = json::array();
  std::map<std::string, std::size_t> counts;
  for (const auto& e : report) {
    entries.push_back({{"source", e.source}, {"item", e.item}, {"status", e.status}, {"message", e.message}});
    ++counts[e.status];
  }
  return {{"schema", "detxai.ingest_report"},
          {"version", 1},
          {"images", dataset.images.size()},
          {"annotations", dataset.annotation_count()},
          {"counts", counts},
          {"entries", std::move(entries)}};
}

IngestResult ingest(std::span<const fs::path> annotation_files, const fs::path& image_dir,
                    const std::string& split) {
  IngestResult result;
  auto& report = result.report;
  std::vector<RawImage> raw;

  for (const auto& file : annotation_files) {
    const std::string source = file.filename().string();
    std::string text;
    try {
      text = read_text_file(file);
    } catch (const IoError& e) {
      throw IngestError("cannot read annotation file " + file.string() + ": " + e.what());
    }
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
      // An empty file stands for an image with no annotations.
      auto img = sibling_image(file, image_dir);
      if (!img) {
        report.push_back({source, "file", "error", "empty annotation file and no image named after it"});
        continue;
      }
      raw.push_back({img->filename().string(), source, {}});
      continue;
    }
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw IngestError("cannot parse " + file.string() + ": " + e.what());
    }
    try {
      if (is_coco(j)) {
        parse_coco(j, source, raw, report);
      } else if (j.is_object() && j.contains("imagePath")) {
        parse_labelme(j, source, raw, report);
      } else {
        throw IngestError("unrecognized annotation format in " + file.string());
      }
    } catch (const json::exception& e) {
      throw IngestError("malformed annotation file " + file.string() + ": " + e.what());
    }
  }

  std::set<std::string> labels;
  for (const auto& im : raw) {
    for (const auto& b : im.boxes) labels.insert(b.label);
  }
  auto& ds = result.dataset;
  ds.split = split;
  ds.class_names.assign(labels.begin(), labels.end());
  auto class_of = [&](const std::string& label) {
    return static_cast<int>(std::lower_bound(ds.class_names.begin(), ds.class_names.end(), label) -
                            ds.class_names.begin());
  };

  std::map<std::string, DatasetImage> merged;
  for (auto& im : raw) {
    const fs::path path = image_dir / im.file_name;
    const std::string image_item = "image:" + im.file_name;
    auto skip_boxes = [&](const std::string& why) {
      for (const auto& b : im.boxes) report.push_back({b.source, b.item, "skipped", why});
    };
    if (!fs::exists(path)) {
      report.push_back({im.source, image_item, "error", "image file not found"});
      skip_boxes("image file not found");
      continue;
    }
    const cv::Mat header = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (header.empty()) {
      report.push_back({im.source, image_item, "error", "image file unreadable"});
      skip_boxes("image file unreadable");
      continue;
    }
    if (ds.tile_width == 0) {
      ds.tile_width = header.cols;
      ds.tile_height = header.rows;
    }
    if (header.cols != ds.tile_width || header.rows != ds.tile_height) {
      report.push_back({im.source, image_item, "error",
                        "tile size " + std::to_string(header.cols) + "x" + std::to_string(header.rows) +
                            " differs from dataset tile size " + std::to_string(ds.tile_width) + "x" +
                            std::to_string(ds.tile_height)});
      skip_boxes("image rejected");
      continue;
    }
    report.push_back({im.source, image_item, "ok", ""});

    const std::string id = path.stem().string();
    auto [it, inserted] = merged.try_emplace(id);
    auto& out = it->second;
    if (inserted) {
      out.id = id;
      out.path = path;
      out.width = header.cols;
      out.height = header.rows;
    }
    const double w = header.cols, h = header.rows;
    for (const auto& b : im.boxes) {
      if (!std::isfinite(b.x0) || !std::isfinite(b.y0) || !std::isfinite(b.x1) || !std::isfinite(b.y1)) {
        report.push_back({b.source, b.item, "skipped", "non-finite coordinates"});
        continue;
      }
      const double x0 = std::clamp(b.x0, 0.0, w), x1 = std::clamp(b.x1, 0.0, w);
      const double y0 = std::clamp(b.y0, 0.0, h), y1 = std::clamp(b.y1, 0.0, h);
      if (!(x0 < x1 && y0 < y1)) {
        report.push_back({b.source, b.item, "skipped", "empty box after clamping to the image"});
        continue;
      }
      const bool clamped = x0 != b.x0 || x1 != b.x1 || y0 != b.y0 || y1 != b.y1;
      report.push_back({b.source, b.item, clamped ? "clamped" : "ok",
                        clamped ? "box clamped to image bounds" : ""});
      out.annotations.push_back({Box(x0, y0, x1, y1), class_of(b.label)});
    }
  }

  for (auto& [id, im] : merged) {
    std::sort(im.annotations.begin(), im.annotations.end(), annotation_less);
    ds.images.push_back(std::move(im));
  }
  return result;
}

std::string dataset_hash(const Dataset& dataset) {
  Sha256 h;
  h.update("detxai.dataset.v1\n");
  for (const auto& name : dataset.class_names) h.update("class " + name + "\n");
  for (const auto& im : dataset.images) {
    h.update("image " + im.id + " " + sha256_hex(read_file_bytes(im.path)) + "\n");
    for (const auto& a : im.annotations) {
      h.update("box " + std::to_string(a.class_id) + " " + format6(a.box.x_min()) + " " +
               format6(a.box.y_min()) + " " + format6(a.box.x_max()) + " " + format6(a.box.y_max()) +
               "\n");
    }
  }
  return h.hex_digest();
}

void save_dataset(const Dataset& dataset, const fs::path& path) {
  write_text_file(path, dataset.to_json().dump(2) + "\n");
}

Dataset load_dataset(const fs::path& path) {
  try {
    return Dataset::from_json(json::parse(read_text_file(path)));
  } catch (const json::exception& e) {
    throw IngestError("cannot parse " + path.string() + ": " + e.what());
  }
}

}  // namespace detxai
