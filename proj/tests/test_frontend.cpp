// Copyright 2026  Seqdiar Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>

#include "seqdiar/frontend.hpp"
#include "seqdiar/gradcheck.hpp"

namespace seqdiar {
namespace {

FrontendConfig tiny_config() {
  FrontendConfig c;
  c.widths = {4, 4, 8, 8};
  c.blocks = {1, 1, 1, 1};
  c.embed_dim = 16;
  return c;
}

TEST(Frontend, MapShapeFollowsEighthDownsampling) {
  Rng r(1);
  FrontendConfig c;  // reference widths
  ResNetFrontend f(c, r);
  // Published geometry: 16 s of 10 ms frames at 80 channels.
  const auto s = f.map_shape(1600, 80);
  EXPECT_EQ(s[0], 512);
  EXPECT_EQ(s[1], 200);
  EXPECT_EQ(s[2], 10);
  // Non-divisible time pads up.
  const auto s2 = f.map_shape(1601, 80);
  EXPECT_EQ(s2[1], 201);
  EXPECT_EQ(f.cfg.frame_dim(), 1024);
}

TEST(Frontend, ForwardMatchesMapShape) {
  Rng r(2);
  auto c = tiny_config();
  ResNetFrontend f(c, r);
  NoGradGuard ng;
  auto feats = Tensor::randn({35, 80}, r);
  auto m = f.feature_map(feats);
  const auto want = f.map_shape(35, 80);
  ASSERT_EQ(m->ndim(), 3);
  EXPECT_EQ(m->dim(0), want[0]);
  EXPECT_EQ(m->dim(1), want[1]);  // ceil(35/8) = 5
  EXPECT_EQ(m->dim(2), want[2]);
  EXPECT_EQ(m->dim(1), 5);
  auto reps = f.frame_representations(feats);
  EXPECT_EQ(reps->shape, (std::vector<int64_t>{5, 2 * 8}));
  for (double v : reps->data) EXPECT_TRUE(std::isfinite(v));
}

TEST(Frontend, EmbeddingIsUnitNorm) {
  Rng r(3);
  ResNetFrontend f(tiny_config(), r);
  NoGradGuard ng;
  auto a = Tensor::randn({24, 80}, r);
  auto b = Tensor::randn({24, 80}, r);
  auto ea = f.embedding(a);
  auto eb = f.embedding(b);
  ASSERT_EQ(ea->shape, (std::vector<int64_t>{1, 16}));
  double na = 0.0, dot = 0.0;
  for (int64_t j = 0; j < 16; ++j) {
    na += ea->data[static_cast<size_t>(j)] * ea->data[static_cast<size_t>(j)];
    dot += ea->data[static_cast<size_t>(j)] * eb->data[static_cast<size_t>(j)];
  }
  EXPECT_NEAR(na, 1.0, 1e-9);
  EXPECT_LT(std::fabs(dot), 0.999);  // different inputs, different directions
}

TEST(Frontend, FreezeStopsRecording) {
  Rng r(4);
  ResNetFrontend f(tiny_config(), r);
  auto& tape = GradTape::active();
  tape.reset();
  f.set_trainable(false);
  auto feats = Tensor::randn({16, 80}, r);
  auto reps = f.frame_representations(feats);
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_FALSE(reps->requires_grad);
  f.set_trainable(true);
  auto reps2 = f.frame_representations(feats);
  EXPECT_GT(tape.size(), 0u);
  EXPECT_TRUE(reps2->requires_grad);
  tape.reset();
}

TEST(Frontend, ParamNamesUniqueAndComplete) {
  Rng r(5);
  ResNetFrontend f(tiny_config(), r);
  ParamMap pm;
  f.collect("frontend", pm);
  // stem (4) + 4 stages x 1 block x (c1 4 + c2 4 [+ proj 4]) + embed (2).
  // Stage 0 has no projection (stride 1, same width); stages 1..3 do.
  // Stage 1 keeps width 4 but strides, so it projects too.
  EXPECT_EQ(pm.items.size(), 4u + (8u + 12u + 12u + 12u) + 2u);
  EXPECT_NE(pm.find("frontend.stem.w"), nullptr);
  EXPECT_NE(pm.find("frontend.embed.b"), nullptr);
  EXPECT_EQ(pm.find("frontend.nope"), nullptr);
}

TEST(Frontend, GradientsFlowThroughWholeStack) {
  Rng r(6);
  FrontendConfig c;
  c.widths = {2, 2, 4, 4};
  c.blocks = {1, 1, 1, 1};
  c.embed_dim = 8;
  ResNetFrontend f(c, r);
  ParamMap pm;
  f.collect("f", pm);
  auto feats = Tensor::randn({9, 16}, r, 0.5);
  auto rep = finite_diff_check(
      pm.tensors(),
      [&] {
        auto reps = f.frame_representations(feats);
        return mean_all(mul(reps, reps));
      },
      1e-5, /*sample_per_param=*/3);
  EXPECT_LT(rep.max_rel_err, 1e-4) << "checked " << rep.checked;
}

TEST(ArcFace, AlignedEmbeddingGetsMarginLogit) {
  Rng r(7);
  ArcFaceHead head(5, 12, r);
  // Make class 2's weight row a known direction and the query equal to it.
  auto e = Tensor::create({1, 12});
  for (int64_t j = 0; j < 12; ++j) {
    const double v = r.normal();
    head.w->at(2, j) = v;
    e->data[static_cast<size_t>(j)] = v;
  }
  auto en = l2_normalize_rows(e);
  auto logits = head.logits(en, {2});
  EXPECT_NEAR(logits->at(0, 2), 32.0 * std::cos(0.2), 5e-3);
  // Other logits are bounded by the scale.
  for (int64_t j = 0; j < 5; ++j) EXPECT_LE(std::fabs(logits->at(0, j)), 32.0 + 1e-9);
}

TEST(ArcFace, MarginLowersTrueClassScore) {
  Rng r(8);
  ArcFaceHead head(4, 8, r);
  auto e = l2_normalize_rows(Tensor::randn({3, 8}, r));
  auto cosines = matmul(e, transpose(l2_normalize_rows(head.w)));
  auto logits = head.logits(e, {0, 1, 2});
  for (int64_t i = 0; i < 3; ++i) {
    for (int64_t j = 0; j < 4; ++j) {
      if (j == i)
        EXPECT_LT(logits->at(i, j), 32.0 * cosines->at(i, j) + 1e-9);
      else
        EXPECT_NEAR(logits->at(i, j), 32.0 * cosines->at(i, j), 1e-9);
    }
  }
}

}  // namespace
}  // namespace seqdiar
