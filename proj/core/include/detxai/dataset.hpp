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
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "detxai/geometry.hpp"

namespace detxai {

struct DatasetImage {
  std::string id;            // file stem
  std::filesystem::path path;
  int width = 0;
  int height = 0;
  std::vector<AnnotationBox> annotations;  // sorted by class, then corners

  friend bool operator==(const DatasetImage&, const DatasetImage&) = default;
};

struct Dataset {
  std::string split = "test";
  std::vector<std::string> class_names;  // class_id indexes this list
  int tile_width = 0;
  int tile_height = 0;
  std::vector<DatasetImage> images;  // sorted by id

  const DatasetImage* find(const std::string& id) const;
  std::size_t annotation_count() const;

  nlohmann::json to_json() const;
  static Dataset from_json(const nlohmann::json& j);

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// One line of the ingestion report. Every shape, COCO annotation and image
// seen during ingestion produces exactly one entry.
struct ValidationEntry {
  std::string source;  // annotation file
  std::string item;    // "image:<name>", "shape:<i>", "annotation:<id>"
  std::string status;  // ok | clamped | skipped | error
  std::string message;

  friend bool operator==(const ValidationEntry&, const ValidationEntry&) = default;
};

struct IngestResult {
  Dataset dataset;
  std::vector<ValidationEntry> report;

  nlohmann::json report_json() const;
};

// Reads Labelme files (one per image, rectangle shapes) and COCO files
// (images/annotations/categories, bbox = [x, y, w, h]). The format is
// detected per file. Image files are resolved relative to `image_dir`.
// Class ids are assigned by sorting the label names seen across all files.
IngestResult ingest(std::span<const std::filesystem::path> annotation_files,
                    const std::filesystem::path& image_dir, const std::string& split = "test");

// SHA-256 over each image's bytes and its normalized annotations, in id order.
std::string dataset_hash(const Dataset& dataset);

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace detxai
