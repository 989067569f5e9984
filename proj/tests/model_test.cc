// Copyright 2026 The SiamEDP Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "siamedp/model.h"
#include "siamedp/serialize.h"
#include "siamedp/synth.h"
#include "test_util.h"

namespace siamedp {
namespace {

namespace fs = std::filesystem;

GrayImage patterned_reference(bool symmetric) {
  GrayImage g(24, 24);
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 24; ++x) {
      const int xs = symmetric ? std::min(x, 23 - x) : x;
      g.at(x, y) = static_cast<std::uint8_t>((xs * 37 + y * 11 + xs * y) % 256);
    }
  }
  return g;
}

// Horizontal mirror of every channel of an N x C x H x W tensor.
Tensor mirror(const Tensor& t) {
  Tensor out(t.shape());
  for (int n = 0; n < t.n(); ++n)
    for (int c = 0; c < t.c(); ++c)
      for (int y = 0; y < t.h(); ++y)
        for (int x = 0; x < t.w(); ++x) out.at(n, c, y, x) = t.at(n, c, y, t.w() - 1 - x);
  return out;
}

// Makes every kernel row a palindrome so the convolution commutes with mirroring.
void symmetrize_kernel(Tensor& w) {
  const int k = w.shape()[3];
  for (std::size_t base = 0; base < w.size(); base += k)
    for (int x = 0; x < k / 2; ++x) w[base + k - 1 - x] = w[base + x];
}

TEST(ModelTest, ReferenceFeaturesAreThreeByThree) {
  const DetectorModel m = make_model(BackboneConfig{}, 1, patterned_reference(false));
  EXPECT_EQ(m.ref_right.shape(), (Shape{1, 128, 3, 3}));
  EXPECT_EQ(m.ref_left.shape(), (Shape{1, 128, 3, 3}));
  EXPECT_EQ(m.head.weight.shape(), (Shape{2, 128}));
  for (float v : m.head.weight.vec()) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(m.alpha, 8.0f);
}

TEST(ModelTest, CachedReferencesMatchFreshComputation) {
  DetectorModel m = make_model(BackboneConfig::uniform(8), 2, patterned_reference(false));
  EXPECT_EQ(m.ref_right, build_reference_feature(m.backbone, m.reference_image, Side::kRight));
  EXPECT_EQ(m.ref_left, build_reference_feature(m.backbone, m.reference_image, Side::kLeft));
  for (float& w : m.backbone.stem.conv.weight.vec()) w = -w;
  const Tensor stale = m.ref_right;
  refresh_reference_features(m);
  EXPECT_NE(m.ref_right, stale);
  EXPECT_EQ(m.ref_right, build_reference_feature(m.backbone, m.reference_image, Side::kRight));
}

TEST(ModelTest, LeftReferenceIsTheMirroredImage) {
  const DetectorModel m = make_model(BackboneConfig::uniform(8), 3, patterned_reference(false));
  const GrayImage flipped = flip_horizontal(m.reference_image);
  EXPECT_EQ(m.ref_left, build_reference_feature(m.backbone, flipped, Side::kRight));
  const DetectorModel s = make_model(BackboneConfig::uniform(8), 3, patterned_reference(true));
  EXPECT_EQ(s.ref_left, s.ref_right);
}

TEST(ModelTest, ReferenceRequiresTwentyFourSquare) {
  const auto b = Backbone<float>::build(BackboneConfig::uniform(4), 1);
  EXPECT_THROW(build_reference_feature(b, GrayImage(23, 24), Side::kRight), ShapeError);
  EXPECT_THROW(reference_pair<float>(GrayImage(24, 25)), ShapeError);
  const Tensor pair = reference_pair<float>(patterned_reference(false));
  EXPECT_EQ(pair.shape(), (Shape{2, 1, 24, 24}));
  EXPECT_FLOAT_EQ(pair.at(1, 0, 3, 0), pair.at(0, 0, 3, 23));
}

TEST(DetectTest, DeterministicAndInsideTheImage) {
  const DetectorModel m = make_model(BackboneConfig{}, 4, patterned_reference(false));
  const auto sample = synth_sample(SynthConfig{}, 0);
  const DetectionPair a = detect(m, sample.image);
  const DetectionPair b = detect(m, sample.image);
  EXPECT_EQ(a.right.position, b.right.position);
  EXPECT_EQ(a.left.position, b.left.position);
  EXPECT_EQ(a.right.score, b.right.score);
  for (const Detection* d : {&a.right, &a.left}) {
    EXPECT_GE(d->position.x, 0.0);
    EXPECT_LE(d->position.x, 127.0);
    EXPECT_GE(d->position.y, 0.0);
    EXPECT_LE(d->position.y, 95.0);
    EXPECT_EQ(d->offset, (Vec2{0, 0}));
    EXPECT_EQ(d->position, (Vec2{8.0 * d->coarse.col, 8.0 * d->coarse.row}));
  }
}

TEST(DetectTest, SingleBackbonePassPerImage) {
  const DetectorModel m = make_model(BackboneConfig::uniform(8), 5, patterned_reference(false));
  const FoldedBackbone folded = fold_batchnorm(m.backbone);
  const GrayImage img(64, 48, 100);
  const auto start = backbone_forward_count();
  detect(m, img);
  EXPECT_EQ(backbone_forward_count() - start, 1u);
  detect(m, img, &folded);
  EXPECT_EQ(backbone_forward_count() - start, 2u);
}

TEST(DetectTest, MirroredImageSwapsSidesOnSymmetricModel) {
  // Odd width 121: the stride-8 sampling grid is mirror-symmetric.
  DetectorModel m = make_model(BackboneConfig::uniform(8), 6, patterned_reference(false));
  m.backbone.for_each_layer([](const std::string&, ConvBn<float>& l) { symmetrize_kernel(l.conv.weight); });
  refresh_reference_features(m);
  std::mt19937_64 rng(6);
  const Tensor x = testing::random_tensor<float>(Shape{1, 1, 48, 121}, rng, 0.0, 1.0);
  const Tensor f = extract_features(m.backbone, x, Mode::kEval);
  const Tensor fm = extract_features(m.backbone, mirror(x), Mode::kEval);
  EXPECT_LT(testing::max_abs_diff(fm, mirror(f)), 1e-4);
  const Detection r = detect_side(f, m.ref_right, m.head, m.alpha, 0, 121, 48);
  const Detection lm = detect_side(fm, mirror(m.ref_right), m.head, m.alpha, 0, 121, 48);
  EXPECT_EQ(lm.coarse.row, r.coarse.row);
  EXPECT_EQ(lm.coarse.col, f.w() - 1 - r.coarse.col);
  EXPECT_NEAR(lm.score, r.score, 1e-5);
}

TEST(DetectTest, SmallImagesAreRejected) {
  const DetectorModel m = make_model(BackboneConfig::uniform(4), 7, patterned_reference(false));
  EXPECT_THROW(detect(m, GrayImage(20, 40)), Error);
}

TEST(SerializeTest, CheckpointRoundTripIsBitwise) {
  std::mt19937_64 rng(8);
  Checkpoint c{make_model(BackboneConfig::uniform(8), 8, patterned_reference(false)), {{"seed", 3}}, 42};
  c.model.head.weight = testing::random_tensor<float>(Shape{2, 8}, rng);
  c.model.backbone.blocks[2].second.bn.running_var[1] = 1.75f;
  c.model.cosface.margin = 0.2;
  const auto bytes = encode_checkpoint(c);
  const Checkpoint d = decode_checkpoint(bytes);
  EXPECT_EQ(encode_checkpoint(d), bytes);
  EXPECT_EQ(d.iteration, 42);
  EXPECT_EQ(d.config, c.config);
  EXPECT_EQ(d.model.head.weight, c.model.head.weight);
  EXPECT_EQ(d.model.reference_image, c.model.reference_image);
  EXPECT_EQ(d.model.ref_left, c.model.ref_left);
  EXPECT_EQ(d.model.cosface.margin, 0.2);
  EXPECT_EQ(d.model.backbone.blocks[2].second.bn.running_var[1], 1.75f);

  const fs::path p = fs::temp_directory_path() / "siamedp_test_ckpt.siam";
  save_checkpoint(p, c);
  EXPECT_EQ(encode_checkpoint(load_checkpoint(p)), bytes);
  const auto sample = synth_sample(SynthConfig{}, 1);
  const DetectionPair a = detect(c.model, sample.image), b = detect(d.model, sample.image);
  EXPECT_EQ(a.right.position, b.right.position);
  EXPECT_EQ(a.left.position, b.left.position);
}

TEST(SerializeTest, BackboneRoundTripPreservesTopology) {
  BackboneConfig cfg;
  cfg.stem_channels = 6;
  cfg.stage_channels = {6, 10, 12, 12};
  cfg.stage_strides = {1, 2, 2, 1};
  cfg.blocks_per_stage = 1;
  const auto b = Backbone<float>::build(cfg, 9);
  const auto bytes = encode_backbone(b);
  const auto d = decode_backbone(bytes);
  EXPECT_EQ(d.config(), cfg);
  EXPECT_EQ(encode_backbone(d), bytes);
}

TEST(SerializeTest, RejectsCorruptContainers) {
  const auto b = Backbone<float>::build(BackboneConfig::uniform(4), 1);
  auto bytes = encode_backbone(b);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_backbone(bad_magic), FormatError);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 4);
  EXPECT_THROW(decode_backbone(truncated), FormatError);
  EXPECT_THROW(decode_backbone(std::vector<std::uint8_t>(5, 0)), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes), FormatError);
  EXPECT_THROW(load_checkpoint("/nonexistent/model.siam"), Error);
}

}  // namespace
}  // namespace siamedp
