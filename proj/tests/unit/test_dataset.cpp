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
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <vector>

#include <gtest/gtest.h>

#include "detxai/config.hpp"
#include "detxai/dataset.hpp"
#include "detxai/errors.hpp"
#include "detxai/image_io.hpp"
#include "detxai/synthetic.hpp"
#include "fixtures.hpp"

namespace detxai {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::TempDir;

void write_json(const fs::path& p, const json& j) { write_text_file(p, j.dump(2)); }

json labelme(const std::string& image, const std::vector<std::pair<std::string, json>>& shapes) {
  json s = json::array();
  for (const auto& [label, pts] : shapes) {
    s.push_back({{"label", label}, {"points", pts}, {"shape_type", "rectangle"}});
  }
  return {{"version", "5.0.1"}, {"imagePath", image}, {"shapes", s}, {"imageWidth", 64}, {"imageHeight", 48}};
}

const ValidationEntry* find_entry(const IngestResult& r, const std::string& item, const std::string& status) {
  for (const auto& e : r.report) {
    if (e.item == item && e.status == status) return &e;
  }
  return nullptr;
}

TEST(Ingest, LabelmeRectangleToCorners) {
  TempDir dir("ingest_lm");
  save_png(dir / "a.png", testing::solid(48, 64, 0.5f));
  write_json(dir / "a.json", labelme("a.png", {{"seal", json::array({{10, 10}, {30, 40}})},
                                                 {"seal", json::array({{50, 30}, {40, 20}})}}));
  const std::vector<fs::path> files{dir / "a.json"};
  const IngestResult r = ingest(files, dir.path());
  ASSERT_EQ(r.dataset.images.size(), 1u);
  const auto& im = r.dataset.images[0];
  EXPECT_EQ(im.id, "a");
  EXPECT_EQ(im.width, 64);
  EXPECT_EQ(im.height, 48);
  ASSERT_EQ(im.annotations.size(), 2u);
  EXPECT_EQ(im.annotations[0].box, Box(10, 10, 30, 40));
  EXPECT_EQ(im.annotations[1].box, Box(40, 20, 50, 30));  // reversed corners
  EXPECT_EQ(r.dataset.class_names, (std::vector<std::string>{"seal"}));
  EXPECT_EQ(r.dataset.tile_width, 64);
}

TEST(Ingest, CocoBboxToCorners) {
  TempDir dir("ingest_coco");
  save_png(dir / "a.png", testing::solid(48, 64, 0.5f));
  const json coco = {{"images", {{{"id", 7}, {"file_name", "a.png"}, {"width", 64}, {"height", 48}}}},
                     {"categories", {{{"id", 1}, {"name", "seal"}}}},
                     {"annotations", {{{"id", 1}, {"image_id", 7}, {"category_id", 1}, {"bbox", {10, 10, 20, 30}}}}}};
  write_json(dir / "coco.json", coco);
  const std::vector<fs::path> files{dir / "coco.json"};
  const IngestResult r = ingest(files, dir.path());
  ASSERT_EQ(r.dataset.images.size(), 1u);
  ASSERT_EQ(r.dataset.images[0].annotations.size(), 1u);
  EXPECT_EQ(r.dataset.images[0].annotations[0].box, Box(10, 10, 30, 40));
}

// Same synthetic scenes written both ways.
TEST(Ingest, LabelmeAndCocoAgree) {
  TempDir dir("ingest_both");
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "labelme");
  std::vector<SyntheticScene> scenes;
  std::vector<std::string> names;
  std::vector<fs::path> lm_files;
  for (int i = 0; i < 6; ++i) {
    SyntheticParams p;
    p.width = p.height = 64;
    p.min_objects = 0;
    p.seed = 100 + i;
    p.max_radius = 8.0;
    p.min_radius = 4.0;
    scenes.push_back(make_scene(p, "tile_" + std::to_string(i)));
    names.push_back(scenes.back().id + ".png");
    save_png(dir / "images" / names.back(), scenes.back().image);
    lm_files.push_back(dir / "labelme" / (scenes.back().id + ".json"));
    write_json(lm_files.back(), labelme_json(scenes.back(), "../images/" + names.back()));
  }
  write_json(dir / "coco.json", coco_json(scenes, names));
  const IngestResult a = ingest(lm_files, dir / "images");
  const std::vector<fs::path> coco_files{dir / "coco.json"};
  const IngestResult b = ingest(coco_files, dir / "images");
  EXPECT_TRUE(a.dataset == b.dataset);
  EXPECT_EQ(a.dataset.images.size(), 6u);
  EXPECT_EQ(dataset_hash(a.dataset), dataset_hash(b.dataset));
  std::size_t boxes = 0;
  for (const auto& s : scenes) boxes += s.annotations.size();
  EXPECT_EQ(a.dataset.annotation_count(), boxes);
  EXPECT_GT(boxes, 0u);
}

TEST(Ingest, EveryInvalidEntryIsReported) {
  TempDir dir("ingest_bad");
  save_png(dir / "a.png", testing::solid(48, 64, 0.5f));
  save_png(dir / "big.png", testing::solid(50, 64, 0.5f));
  save_png(dir / "empty.png", testing::solid(48, 64, 0.5f));
  write_text_file(dir / "junk.png", "not an image");
  json lm = labelme("a.png", {{"seal", json::array({{10, 10}, {30, 40}})},
                               {"seal", json::array({{50, 30}, {90, 60}})},     // clamped
                               {"seal", json::array({{100, 100}, {120, 120}})},  // outside
                               {"seal", json::array({{1, 1}})}});               // one point
  lm["shapes"].push_back({{"label", "seal"}, {"points", {{1, 1}, {5, 5}}}, {"shape_type", "polygon"}});
  lm["shapes"].push_back({{"points", {{1, 1}, {5, 5}}}});  // no label
  write_json(dir / "a.json", lm);
  write_json(dir / "missing.json", labelme("nowhere.png", {{"seal", json::array({{1, 1}, {9, 9}})}}));
  write_json(dir / "junk.json", labelme("junk.png", {}));
  write_json(dir / "big.json", labelme("big.png", {{"seal", json::array({{1, 1}, {9, 9}})}}));
  write_text_file(dir / "empty.json", "");
  write_text_file(dir / "orphan.json", "\n");
  const json coco = {{"images", {{{"id", 1}, {"file_name", "a.png"}}}},
                     {"categories", {{{"id", 1}, {"name", "seal"}}}},
                     {"annotations",
                      {{{"id", 10}, {"image_id", 2}, {"category_id", 1}, {"bbox", {1, 1, 5, 5}}},
                       {{"id", 11}, {"image_id", 1}, {"category_id", 9}, {"bbox", {1, 1, 5, 5}}},
                       {{"id", 12}, {"image_id", 1}, {"category_id", 1}, {"bbox", {1, 1, 5}}},
                       {{"id", 13}, {"image_id", 1}, {"category_id", 1}, {"bbox", {1, 1, -5, 5}}},
                       {{"id", 14}, {"image_id", 1}, {"category_id", 1}, {"bbox", {2, 2, 4, 4}}}}}};
  write_json(dir / "coco.json", coco);

  const std::vector<fs::path> files{dir / "a.json",     dir / "missing.json", dir / "junk.json", dir / "big.json",
                                    dir / "empty.json", dir / "orphan.json",  dir / "coco.json"};
  const IngestResult r = ingest(files, dir.path());

  EXPECT_TRUE(find_entry(r, "shape:0", "ok"));
  EXPECT_TRUE(find_entry(r, "shape:1", "clamped"));
  EXPECT_TRUE(find_entry(r, "shape:2", "skipped"));
  EXPECT_TRUE(find_entry(r, "shape:3", "skipped"));
  EXPECT_TRUE(find_entry(r, "shape:4", "skipped"));
  EXPECT_TRUE(find_entry(r, "shape:5", "skipped"));
  EXPECT_TRUE(find_entry(r, "image:nowhere.png", "error"));
  EXPECT_TRUE(find_entry(r, "image:junk.png", "error"));
  EXPECT_TRUE(find_entry(r, "image:big.png", "error"));
  EXPECT_TRUE(find_entry(r, "file", "error"));  // orphan.json has no image
  for (const char* id : {"10", "11", "12", "13"}) {
    EXPECT_TRUE(find_entry(r, std::string("annotation:") + id, "skipped")) << id;
  }
  EXPECT_TRUE(find_entry(r, "annotation:14", "ok"));

  // Every input shape or annotation appears exactly once with a box status.
  std::size_t box_entries = 0;
  for (const auto& e : r.report) {
    if (e.item.rfind("shape:", 0) == 0 || e.item.rfind("annotation:", 0) == 0) ++box_entries;
  }
  EXPECT_EQ(box_entries, 6u + 1u + 1u + 5u);

  ASSERT_EQ(r.dataset.images.size(), 2u);  // a (merged from both files) and empty
  const auto* a = r.dataset.find("a");
  ASSERT_TRUE(a);
  EXPECT_EQ(a->annotations.size(), 3u);
  EXPECT_EQ(a->annotations[2].box, Box(50, 30, 64, 48));
  const auto* empty = r.dataset.find("empty");
  ASSERT_TRUE(empty);
  EXPECT_TRUE(empty->annotations.empty());

  const json rep = r.report_json();
  EXPECT_EQ(rep.at("entries").size(), r.report.size());

  write_text_file(dir / "broken.json", "{ not json");
  const std::vector<fs::path> broken{dir / "broken.json"};
  EXPECT_THROW(ingest(broken, dir.path()), IngestError);
  const std::vector<fs::path> absent{dir / "absent.json"};
  EXPECT_THROW(ingest(absent, dir.path()), IngestError);
}

TEST(Dataset, SaveLoadAndHashSensitivity) {
  TempDir dir("ds_hash");
  fs::create_directories(dir / "img");
  SyntheticParams p;
  p.width = p.height = 48;
  p.seed = 4;
  p.min_radius = 4;
  p.max_radius = 6;
  const auto scene = make_scene(p, "t0");
  save_png(dir / "img/t0.png", scene.image);
  write_json(dir / "t0.json", labelme_json(scene, "t0.png"));
  const std::vector<fs::path> files{dir / "t0.json"};
  const Dataset ds = ingest(files, dir / "img").dataset;
  save_dataset(ds, dir / "ds.json");
  const Dataset back = load_dataset(dir / "ds.json");
  EXPECT_TRUE(back == ds);
  const std::string h0 = dataset_hash(ds);
  EXPECT_EQ(dataset_hash(back), h0);

  // Flip one byte inside the image file.
  auto bytes = read_file_bytes(dir / "img/t0.png");
  bytes[bytes.size() / 2] ^= 0x01;
  write_file_bytes(dir / "img/t0.png", bytes);
  EXPECT_NE(dataset_hash(ds), h0);

  Dataset moved = ds;
  moved.images[0].annotations.push_back({Box(1, 1, 2, 2), 0});
  EXPECT_NE(dataset_hash(moved), dataset_hash(ds));
}

TEST(RunConfig, JsonRoundTripAndUnknownKeys) {
  RunConfig c;
  c.backend = Backend::kTinyCnn;
  c.seed = 99;
  c.lime.n_samples = 250;
  c.search.tau = 0.4;
  c.fidelity.attribution_threshold = 0.6;
  c.cam_methods = {CamMethod::kHiResCam};
  c.ops = {PerturbationOp{PerturbationKind::kBlur, 3.0, 0.6, 2, 0}};
  const json j = c.to_json();
  const RunConfig back = RunConfig::from_json(j);
  EXPECT_EQ(back.to_json(), j);
  EXPECT_EQ(back.hash(), c.hash());
  EXPECT_EQ(back.effective_ops().size(), 1u);
  EXPECT_EQ(RunConfig{}.effective_ops().size(), 4u);

  json extra = j;
  extra["lime"]["n_sampels"] = 10;
  EXPECT_THROW(RunConfig::from_json(extra), InvalidArgument);
  json top = j;
  top["colour"] = "red";
  EXPECT_THROW(RunConfig::from_json(top), InvalidArgument);
  json bad = j;
  bad["perturbation"]["tau"] = 1.5;
  EXPECT_THROW(RunConfig::from_json(bad), InvalidArgument);

  RunConfig other = c;
  other.seed = 100;
  EXPECT_NE(other.hash(), c.hash());
}

TEST(RunConfig, DerivedSeedsAndDetectorFactory) {
  EXPECT_EQ(derive_seed(1, "a", "lime"), derive_seed(1, "a", "lime"));
  EXPECT_NE(derive_seed(1, "a", "lime"), derive_seed(1, "b", "lime"));
  EXPECT_NE(derive_seed(1, "a", "lime"), derive_seed(2, "a", "lime"));
  EXPECT_NE(derive_seed(1, "a", "lime"), derive_seed(1, "a", "noise"));

  RunConfig c;
  EXPECT_EQ(make_detector(c)->name(), "toy");
  c.backend = Backend::kTinyCnn;
  EXPECT_EQ(make_detector(c)->name(), "tinycnn");
  c.backend = Backend::kBridge;
  ::unsetenv(kBridgeCommandEnv);
  EXPECT_THROW(make_detector(c), InvalidArgument);
  ::setenv(kBridgeCommandEnv, "cat", 1);
  EXPECT_EQ(make_detector(c)->name(), "bridge");
  ::unsetenv(kBridgeCommandEnv);
}

}  // namespace
}  // namespace detxai
