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
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "detxai/bridge.hpp"
#include "detxai/bridge_protocol.hpp"
#include "detxai/encoding.hpp"
#include "detxai/errors.hpp"
#include "detxai/image_io.hpp"
#include "detxai/tiny_cnn.hpp"
#include "detxai/toy_detector.hpp"
#include "fixtures.hpp"

namespace detxai {
namespace {

using testing::paint;
using testing::permissive_config;
using testing::solid;

const std::string kBridge = DETXAI_TOY_BRIDGE;

ImageBuffer two_blobs() {
  ImageBuffer img = solid(64, 80, 0.85f);
  paint(img, 8, 8, 24, 28, 0.2f);
  paint(img, 36, 44, 56, 72, 0.5f);
  // Snap to the 16-bit grid the wire format carries so both sides see the same pixels.
  return decode_png(encode_png(img, 16));
}

std::string fmt(const Detection& d) {
  return format6(d.box.x_min()) + "," + format6(d.box.y_min()) + "," + format6(d.box.x_max()) + "," +
         format6(d.box.y_max()) + "," + std::to_string(d.class_id) + "," + format6(d.score);
}

TEST(Bridge, DetectMatchesInProcessDetector) {
  const ImageBuffer img = two_blobs();
  for (const std::string backend : {"toy", "tinycnn"}) {
    BridgeDetector remote(kBridge + " --backend " + backend, permissive_config());
    const DetectionSet got = remote.detect_one(img);
    const DetectionSet want = backend == "toy" ? ToyDetector(permissive_config()).detect_one(img)
                                               : TinyCnnDetector(permissive_config()).detect_one(img);
    ASSERT_EQ(got.size(), want.size()) << backend;
    ASSERT_FALSE(want.empty());
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_EQ(fmt(got[i]), fmt(want[i]));
  }
}

TEST(Bridge, BatchesAndScoreThresholdOnClientSide) {
  DetectorConfig cfg;
  cfg.score_threshold = 0.9;
  BridgeDetector remote(kBridge + " --backend toy", cfg);
  const std::vector<ImageBuffer> imgs{two_blobs(), solid(32, 32, 1.0f), two_blobs()};
  const auto sets = remote.detect(imgs);
  ASSERT_EQ(sets.size(), 3u);
  EXPECT_EQ(sets[0].size(), 1u);  // 0.2 blob scores 1; 0.5 blob scores 0.875
  EXPECT_TRUE(sets[1].empty());
  EXPECT_EQ(sets[0], sets[2]);
}

TEST(Bridge, IntrospectMatchesInProcess) {
  const ImageBuffer img = two_blobs();
  TinyCnnDetector local(permissive_config());
  const auto dets = local.detect_one(img);
  ASSERT_FALSE(dets.empty());
  const auto want = local.introspect(img, dets[0], "features");

  BridgeDetector remote(kBridge + " --backend tinycnn", permissive_config());
  EXPECT_TRUE(remote.supports_introspection());
  const auto got = remote.introspect(img, dets[0], "features");
  ASSERT_TRUE(got.activations.same_shape(want.activations));
  ASSERT_TRUE(got.gradients.same_shape(want.gradients));
  for (std::size_t i = 0; i < want.activations.size(); ++i) {
    EXPECT_NEAR(got.activations[i], want.activations[i], 1e-9);
    EXPECT_NEAR(got.gradients[i], want.gradients[i], 1e-9);
  }
  EXPECT_EQ(got.target_detection_index, want.target_detection_index);
  EXPECT_THROW(remote.introspect(img, dets[0], "no_such_layer"), AdapterError);
  // The connection survives an error reply.
  EXPECT_EQ(remote.detect_one(img).size(), dets.size());
}

TEST(Bridge, DetectOnlyServerRaisesCapabilityError) {
  const ImageBuffer img = two_blobs();
  BridgeDetector remote(kBridge + " --backend tinycnn --detect-only", permissive_config());
  const auto dets = remote.detect_one(img);
  ASSERT_FALSE(dets.empty());
  EXPECT_THROW(remote.introspect(img, dets[0], "features"), CapabilityError);
  EXPECT_FALSE(remote.supports_introspection());
  EXPECT_THROW(remote.introspect(img, dets[0], "features"), CapabilityError);

  BridgeDetector toy(kBridge + " --backend toy", permissive_config());
  EXPECT_THROW(toy.introspect(img, toy.detect_one(img)[0], "features"), CapabilityError);
}

TEST(Bridge, BrokenPeersFailLoudly) {
  const ImageBuffer img = two_blobs();
  {
    BridgeDetector dead("exit 0", permissive_config());
    EXPECT_THROW(dead.detect_one(img), AdapterError);
  }
  {
    BridgeDetector garbage("printf 'not a frame at all'; cat > /dev/null", permissive_config());
    EXPECT_THROW(garbage.detect_one(img), AdapterError);
  }
  {
    // A well-formed frame carrying something that is not a detection reply.
    BridgeDetector wrong("printf '\\000\\000\\000\\002[]'; cat > /dev/null", permissive_config());
    EXPECT_THROW(wrong.detect_one(img), AdapterError);
  }
  {
    BridgeDetector missing("/nonexistent/detxai-bridge-binary", permissive_config());
    EXPECT_THROW(missing.detect_one(img), AdapterError);
  }
}

TEST(BridgeProtocol, ErrorRepliesCarryTheirCode) {
  using namespace bridge;
  EXPECT_THROW(raise_if_error(make_error("nope", "capability")), CapabilityError);
  EXPECT_THROW(raise_if_error(make_error("nope", "internal")), AdapterError);
  EXPECT_NO_THROW(raise_if_error(nlohmann::json{{"ok", true}}));
}

TEST(BridgeProtocol, DetectionJsonRoundTrip) {
  using namespace bridge;
  const DetectionSet set("x", {Detection(Box(1.5, 2, 10, 20.25), 2, 0.75), Detection(Box(0, 0, 4, 4), 0, 0.5)});
  EXPECT_EQ(detections_from_json(detections_to_json(set), "x"), set);
  FeatureTensor t(2, 3, 4);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.1 * static_cast<double>(i) - 0.7;
  EXPECT_EQ(tensor_from_json(tensor_to_json(t)), t);
}

}  // namespace
}  // namespace detxai
