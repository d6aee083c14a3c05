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
#include <vector>

#include "seqdiar/gradcheck.hpp"
#include "seqdiar/ops.hpp"
#include "seqdiar/rng.hpp"

namespace seqdiar {
namespace {

constexpr double kTol = 1e-4;

// ---------------------------------------------------------------------------
// Forward oracles
// ---------------------------------------------------------------------------

TEST(OpsForward, MatmulHandValues) {
  auto a = Tensor::create({2, 2}, {1, 2, 3, 4});
  auto b = Tensor::create({2, 1}, {5, 6});
  auto c = matmul(a, b);
  EXPECT_DOUBLE_EQ(c->data[0], 17.0);
  EXPECT_DOUBLE_EQ(c->data[1], 39.0);
  EXPECT_THROW(matmul(a, Tensor::create({3, 1})), ShapeError);
}

TEST(OpsForward, LinearMatchesMatmulPlusBias) {
  Rng r(11);
  auto x = Tensor::randn({3, 4}, r);
  auto w = Tensor::randn({2, 4}, r);
  auto b = Tensor::randn({2}, r);
  auto y = linear(x, w, b);
  auto ref = add_rowvec(matmul(x, transpose(w)), b);
  ASSERT_EQ(y->shape, ref->shape);
  for (size_t i = 0; i < y->data.size(); ++i) EXPECT_NEAR(y->data[i], ref->data[i], 1e-12);
}

TEST(OpsForward, LayerNormTwoPoint) {
  auto x = Tensor::create({1, 2}, {1, 3});
  auto gamma = Tensor::create({2}, {1, 1});
  auto beta = Tensor::create({2}, {0, 0});
  auto y0 = layer_norm(x, gamma, beta, 0.0);
  EXPECT_DOUBLE_EQ(y0->data[0], -1.0);
  EXPECT_DOUBLE_EQ(y0->data[1], 1.0);
  auto y = layer_norm(x, gamma, beta);
  EXPECT_NEAR(y->data[0], -1.0, 1e-4);
  EXPECT_NEAR(y->data[1], 1.0, 1e-4);
}

TEST(OpsForward, LayerNormRowsAreStandardised) {
  Rng r(2);
  auto x = Tensor::randn({5, 16}, r, 3.0);
  auto gamma = Tensor::full({16}, 1.0);
  auto beta = Tensor::create({16});
  auto y = layer_norm(x, gamma, beta);
  for (int64_t i = 0; i < 5; ++i) {
    double s = 0.0, sq = 0.0;
    for (int64_t j = 0; j < 16; ++j) {
      s += y->at(i, j);
      sq += y->at(i, j) * y->at(i, j);
    }
    EXPECT_NEAR(s / 16.0, 0.0, 1e-9);
    EXPECT_NEAR(sq / 16.0, 1.0, 1e-4);
  }
}

TEST(OpsForward, SoftmaxHandValues) {
  auto x = Tensor::create({1, 2}, {std::log(1.0), std::log(3.0)});
  auto y = softmax_rows(x);
  EXPECT_NEAR(y->data[0], 0.25, 1e-12);
  EXPECT_NEAR(y->data[1], 0.75, 1e-12);
}

TEST(OpsForward, SoftmaxRowsSumToOne) {
  Rng r(3);
  auto x = Tensor::randn({7, 9}, r, 5.0);
  auto y = softmax_rows(x);
  for (int64_t i = 0; i < 7; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < 9; ++j) {
      s += y->at(i, j);
      EXPECT_GE(y->at(i, j), 0.0);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(OpsForward, GluGateAtZeroHalves) {
  auto x = Tensor::create({1, 2}, {0.8, 0.0});
  auto y = glu(x);
  EXPECT_DOUBLE_EQ(y->data[0], 0.4);
  EXPECT_THROW(glu(Tensor::create({1, 3})), ShapeError);
}

TEST(OpsForward, DepthwiseConvBoxAndDelta) {
  auto x = Tensor::create({4, 1}, {1, 1, 1, 1});
  auto k = Tensor::create({3, 1}, {1, 1, 1});
  auto y = depthwise_conv1d(x, k);
  EXPECT_DOUBLE_EQ(y->data[0], 2.0);
  EXPECT_DOUBLE_EQ(y->data[1], 3.0);
  EXPECT_DOUBLE_EQ(y->data[2], 3.0);
  EXPECT_DOUBLE_EQ(y->data[3], 2.0);

  Rng r(4);
  auto x2 = Tensor::randn({6, 3}, r);
  auto delta = Tensor::create({3, 3});
  for (int64_t c = 0; c < 3; ++c) delta->at(1, c) = 1.0;
  auto y2 = depthwise_conv1d(x2, delta);
  for (size_t i = 0; i < x2->data.size(); ++i) EXPECT_DOUBLE_EQ(y2->data[i], x2->data[i]);

  EXPECT_THROW(depthwise_conv1d(x2, Tensor::create({2, 3})), ConfigError);
}

TEST(OpsForward, BceHandValue) {
  auto p = Tensor::create({1}, {0.5});
  auto y = Tensor::create({1}, {1.0});
  auto loss = bce_loss(p, y);
  EXPECT_NEAR(loss->data[0], std::log(2.0), 1e-12);
  EXPECT_THROW(bce_loss(p, Tensor::create({2})), ShapeError);
}

TEST(OpsForward, BceClampKeepsLossFinite) {
  auto p = Tensor::create({2}, {0.0, 1.0});
  auto y = Tensor::create({2}, {1.0, 0.0});
  auto loss = bce_loss(p, y);
  EXPECT_TRUE(std::isfinite(loss->data[0]));
  EXPECT_NEAR(loss->data[0], -std::log(1e-7), 1e-6);
}

TEST(OpsForward, SegmentalStatPoolHandValues) {
  // Two channels on a 1 x 2 map: channel 0 rows [1,3], channel 1 rows [2,2].
  auto x = Tensor::create({2, 1, 2}, {1, 3, 2, 2});
  auto y = segmental_stat_pool(x);
  ASSERT_EQ(y->shape, (std::vector<int64_t>{1, 4}));
  EXPECT_NEAR(y->data[0], 2.0, 1e-12);
  EXPECT_NEAR(y->data[1], 2.0, 1e-12);
  EXPECT_NEAR(y->data[2], 1.0, 1e-6);
  EXPECT_NEAR(y->data[3], 0.0, 1e-4);
}

TEST(OpsForward, GlobalStatPoolMatchesFlatStats) {
  Rng r(5);
  auto x = Tensor::randn({3, 4, 5}, r);
  auto y = global_stat_pool(x);
  ASSERT_EQ(y->shape, (std::vector<int64_t>{1, 6}));
  for (int64_t c = 0; c < 3; ++c) {
    double s = 0.0;
    for (int64_t i = 0; i < 20; ++i) s += x->data[static_cast<size_t>(c * 20 + i)];
    const double mean = s / 20.0;
    double var = 0.0;
    for (int64_t i = 0; i < 20; ++i) {
      const double d = x->data[static_cast<size_t>(c * 20 + i)] - mean;
      var += d * d;
    }
    var /= 20.0;
    EXPECT_NEAR(y->data[static_cast<size_t>(c)], mean, 1e-12);
    EXPECT_NEAR(y->data[static_cast<size_t>(3 + c)], std::sqrt(var + 1e-10), 1e-12);
  }
}

TEST(OpsForward, ArcFaceAlignedLogit) {
  // Embedding equal to its class weight row: cos = 1, margin pushes the
  // logit to s * cos(m).  The clamp off 1.0 costs a few 1e-3.
  const int64_t sdim = 8;
  auto e = Tensor::create({1, sdim});
  auto w = Tensor::create({3, sdim});
  for (int64_t j = 0; j < sdim; ++j) {
    e->data[static_cast<size_t>(j)] = 1.0;
    w->at(0, j) = 1.0;
    w->at(1, j) = (j % 2 == 0) ? 1.0 : -1.0;
    w->at(2, j) = (j < 4) ? 1.0 : -1.0;
  }
  auto en = l2_normalize_rows(e);
  auto wn = l2_normalize_rows(w);
  auto cosines = matmul(en, transpose(wn));
  auto logits = arcface_margin(cosines, {0}, 32.0, 0.2);
  EXPECT_NEAR(logits->data[0], 32.0 * std::cos(0.2), 5e-3);
  // Off-class entries are plain scaled cosines.
  EXPECT_NEAR(logits->data[1], 32.0 * cosines->data[1], 1e-9);
}

TEST(OpsForward, Conv2dShapesFollowCeilDiv) {
  Rng r(6);
  auto x = Tensor::randn({2, 7, 5}, r);
  auto w3 = Tensor::randn({4, 2, 3, 3}, r);
  auto b = Tensor::create({4});
  auto y1 = conv2d(x, w3, b, 1);
  EXPECT_EQ(y1->shape, (std::vector<int64_t>{4, 7, 5}));
  auto y2 = conv2d(x, w3, b, 2);
  EXPECT_EQ(y2->shape, (std::vector<int64_t>{4, 4, 3}));
  auto w1 = Tensor::randn({4, 2, 1, 1}, r);
  auto y3 = conv2d(x, w1, b, 2);
  EXPECT_EQ(y3->shape, (std::vector<int64_t>{4, 4, 3}));
  EXPECT_THROW(conv2d(x, Tensor::randn({4, 2, 2, 2}, r), b, 1), ConfigError);
}

TEST(OpsForward, Conv2dHandValue) {
  // Single input channel 2x2, 3x3 kernel of ones, stride 1: each output is
  // the sum of the valid neighbourhood.
  auto x = Tensor::create({1, 2, 2}, {1, 2, 3, 4});
  auto w = Tensor::full({1, 1, 3, 3}, 1.0);
  auto b = Tensor::create({1}, {0.5});
  auto y = conv2d(x, w, b, 1);
  EXPECT_DOUBLE_EQ(y->data[0], 10.5);
  EXPECT_DOUBLE_EQ(y->data[1], 10.5);
  EXPECT_DOUBLE_EQ(y->data[2], 10.5);
  EXPECT_DOUBLE_EQ(y->data[3], 10.5);
}

TEST(OpsForward, DropoutIdentityInEval) {
  Rng r(7);
  auto x = Tensor::randn({3, 3}, r);
  auto y = dropout(x, 0.5, /*training=*/false, nullptr);
  EXPECT_EQ(y.get(), x.get());
  auto z = dropout(x, 0.0, /*training=*/true, &r);
  EXPECT_EQ(z.get(), x.get());
  EXPECT_THROW(dropout(x, 1.0, true, &r), ConfigError);
  EXPECT_THROW(dropout(x, -0.1, true, &r), ConfigError);
}

TEST(OpsForward, DropoutKeepsExpectation) {
  Rng r(8);
  auto x = Tensor::full({100, 100}, 1.0);
  auto y = dropout(x, 0.3, true, &r);
  double s = 0.0;
  int64_t zeros = 0;
  for (double v : y->data) {
    s += v;
    if (v == 0.0) ++zeros;
  }
  EXPECT_NEAR(s / 10000.0, 1.0, 0.02);
  EXPECT_NEAR(static_cast<double>(zeros) / 10000.0, 0.3, 0.02);
}

TEST(OpsForward, AttentionUniformWhenKeysEqual) {
  // Identical keys give uniform weights; output is the mean value row.
  auto q = Tensor::create({1, 4}, {1, 2, 3, 4});
  auto k = Tensor::create({3, 4});
  for (int64_t j = 0; j < 3; ++j)
    for (int64_t d = 0; d < 4; ++d) k->at(j, d) = 1.0;
  auto v = Tensor::create({3, 2}, {0, 0, 3, 6, 6, 0});
  auto y = multi_head_attention(q, k, v, 2);
  EXPECT_NEAR(y->data[0], 3.0, 1e-12);
  EXPECT_NEAR(y->data[1], 2.0, 1e-12);
}

TEST(OpsForward, AttentionMaskZeroesBlockedPairs) {
  Rng r(9);
  auto q = Tensor::randn({2, 4}, r);
  auto k = Tensor::randn({3, 4}, r);
  auto v = Tensor::randn({3, 4}, r);
  // Row 0 can only see key 1; row 1 sees nothing.
  std::vector<uint8_t> blocked{1, 0, 1, 1, 1, 1};
  auto y = multi_head_attention(q, k, v, 2, &blocked);
  for (int64_t d = 0; d < 4; ++d) {
    EXPECT_NEAR(y->at(0, d), v->at(1, d), 1e-12);
    EXPECT_DOUBLE_EQ(y->at(1, d), 0.0);
  }
}

TEST(OpsForward, AttentionOrderInvariantBitExact) {
  // With sorted reductions, permuting key/value rows leaves each output row
  // bit-identical.
  Rng r(10);
  for (int trial = 0; trial < 20; ++trial) {
    auto q = Tensor::randn({3, 8}, r);
    auto k = Tensor::randn({5, 8}, r);
    auto v = Tensor::randn({5, 8}, r);
    auto y = multi_head_attention(q, k, v, 4, nullptr, /*order_invariant=*/true);
    std::vector<int> perm{4, 2, 0, 3, 1};
    auto kp = Tensor::create({5, 8});
    auto vp = Tensor::create({5, 8});
    for (int64_t j = 0; j < 5; ++j)
      for (int64_t d = 0; d < 8; ++d) {
        kp->at(j, d) = k->at(perm[static_cast<size_t>(j)], d);
        vp->at(j, d) = v->at(perm[static_cast<size_t>(j)], d);
      }
    auto yp = multi_head_attention(q, kp, vp, 4, nullptr, true);
    for (size_t i = 0; i < y->data.size(); ++i) {
      ASSERT_EQ(y->data[i], yp->data[i]) << "trial " << trial << " element " << i;
    }
  }
}

TEST(OpsForward, AttentionRejectsBadHeadSplit) {
  auto q = Tensor::create({2, 6});
  auto k = Tensor::create({2, 6});
  auto v = Tensor::create({2, 6});
  EXPECT_THROW(multi_head_attention(q, k, v, 4), ConfigError);
  EXPECT_THROW(multi_head_attention(q, k, Tensor::create({3, 6}), 2), ShapeError);
}

TEST(OpsForward, SliceConcatRoundTrip) {
  Rng r(12);
  auto x = Tensor::randn({4, 6}, r);
  auto top = slice_rows(x, 0, 2);
  auto bot = slice_rows(x, 2, 4);
  auto back = concat_rows(top, bot);
  EXPECT_EQ(back->data, x->data);
  auto left = slice_cols(x, 0, 2);
  auto right = slice_cols(x, 2, 6);
  auto back2 = concat_cols(left, right);
  EXPECT_EQ(back2->data, x->data);
  auto padded = pad_rows(x, 6);
  EXPECT_EQ(padded->dim(0), 6);
  EXPECT_DOUBLE_EQ(padded->at(5, 3), 0.0);
}

TEST(OpsForward, L2NormalizeRows) {
  auto x = Tensor::create({1, 2}, {3.0, 4.0});
  auto y = l2_normalize_rows(x);
  EXPECT_NEAR(y->data[0], 0.6, 1e-12);
  EXPECT_NEAR(y->data[1], 0.8, 1e-12);
  EXPECT_THROW(l2_normalize_rows(Tensor::create({1, 2})), NumericError);
}

TEST(OpsForward, CrossEntropyUniformLogits) {
  auto z = Tensor::create({2, 4});
  auto loss = cross_entropy_logits(z, {0, 3});
  EXPECT_NEAR(loss->data[0], std::log(4.0), 1e-12);
}

// ---------------------------------------------------------------------------
// Gradient checks, one per op
// ---------------------------------------------------------------------------

TEST(OpsGrad, Elementwise) {
  Rng r(20);
  auto a = Tensor::randn({3, 4}, r);
  auto b = Tensor::randn({3, 4}, r);
  EXPECT_LT(finite_diff_check({a, b}, [&] { return mean_all(add(a, b)); }).max_rel_err, kTol);
  EXPECT_LT(finite_diff_check({a, b}, [&] { return mean_all(mul(sub(a, b), a)); }).max_rel_err, kTol);
  EXPECT_LT(finite_diff_check({a}, [&] { return sum_all(scale(a, -1.7)); }).max_rel_err, kTol);
}

TEST(OpsGrad, MatmulLinearTranspose) {
  Rng r(21);
  auto a = Tensor::randn({3, 5}, r);
  auto b = Tensor::randn({5, 2}, r);
  EXPECT_LT(finite_diff_check({a, b}, [&] { return mean_all(matmul(a, b)); }).max_rel_err, kTol);
  auto w = Tensor::randn({4, 5}, r);
  auto bias = Tensor::randn({4}, r);
  EXPECT_LT(finite_diff_check({a, w, bias}, [&] { return mean_all(mul(linear(a, w, bias), linear(a, w, bias))); }).max_rel_err, kTol);
  EXPECT_LT(finite_diff_check({a}, [&] { return mean_all(matmul(transpose(a), a)); }).max_rel_err, kTol);
}

TEST(OpsGrad, RowvecReshapeSliceConcatPad) {
  Rng r(22);
  auto x = Tensor::randn({3, 4}, r);
  auto b = Tensor::randn({4}, r);
  EXPECT_LT(finite_diff_check({x, b}, [&] { return mean_all(mul(add_rowvec(x, b), add_rowvec(x, b))); }).max_rel_err, kTol);
  EXPECT_LT(finite_diff_check({x}, [&] { return mean_all(mul(reshape(x, {4, 3}), reshape(x, {4, 3}))); }).max_rel_err, kTol);
  EXPECT_LT(finite_diff_check({x}, [&] {
              auto s = slice_cols(slice_rows(x, 1, 3), 1, 3);
              return mean_all(mul(s, s));
            }).max_rel_err, kTol);
  auto y = Tensor::randn({2, 4}, r);
  EXPECT_LT(finite_diff_check({x, y}, [&] { return mean_all(mul(concat_rows(x, y), concat_rows(x, y))); }).max_rel_err, kTol);
  auto z = Tensor::randn({3, 2}, r);
  EXPECT_LT(finite_diff_check({x, z}, [&] { return mean_all(mul(concat_cols(x, z), concat_cols(x, z))); }).max_rel_err, kTol);
  EXPECT_LT(finite_diff_check({x}, [&] { return mean_all(mul(pad_rows(x, 5), pad_rows(x, 5))); }).max_rel_err, kTol);
}

TEST(OpsGrad, Activations) {
  Rng r(23);
  auto x = Tensor::randn({4, 6}, r);
  // Keep relu inputs away from the kink.
  for (auto& v : x->data)
    if (std::fabs(v) < 1e-3) v = 0.5;
  EXPECT_LT(finite_diff_check({x}, [&] { return mean_all(mul(relu(x), relu(x))); }).max_rel_err, kTol);
  EXPECT_LT(finite_diff_check({x}, [&] { return mean_all(mul(sigmoid(x), sigmoid(x))); }).max_rel_err, kTol);
  EXPECT_LT(finite_diff_check({x}, [&] { return mean_all(mul(swish(x), swish(x))); }).max_rel_err, kTol);
  auto g = Tensor::randn({4, 6}, r);
  EXPECT_LT(finite_diff_check({g}, [&] { return mean_all(mul(glu(g), glu(g))); }).max_rel_err, kTol);
}

TEST(OpsGrad, NormalisationOps) {
  Rng r(24);
  auto x = Tensor::randn({3, 8}, r);
  auto gamma = Tensor::randu({8}, r, 0.5, 1.5);
  auto beta = Tensor::randn({8}, r, 0.1);
  EXPECT_LT(finite_diff_check({x, gamma, beta}, [&] {
              return mean_all(mul(layer_norm(x, gamma, beta), layer_norm(x, gamma, beta)));
            }).max_rel_err, kTol);
  auto m = Tensor::randn({2, 3, 4}, r);
  auto g2 = Tensor::randu({2}, r, 0.5, 1.5);
  auto b2 = Tensor::randn({2}, r, 0.1);
  EXPECT_LT(finite_diff_check({m, g2, b2}, [&] {
              return mean_all(mul(channel_norm(m, g2, b2), channel_norm(m, g2, b2)));
            }).max_rel_err, kTol);
  auto s = Tensor::randn({3, 5}, r);
  EXPECT_LT(finite_diff_check({s}, [&] { return mean_all(mul(softmax_rows(s), softmax_rows(s))); }).max_rel_err, kTol);
  auto n = Tensor::randn({3, 5}, r);
  EXPECT_LT(finite_diff_check({n}, [&] {
              return mean_all(mul(l2_normalize_rows(n), l2_normalize_rows(n)));
            }).max_rel_err, kTol);
}

TEST(OpsGrad, Convolutions) {
  Rng r(25);
  auto x = Tensor::randn({6, 3}, r);
  auto k = Tensor::randn({3, 3}, r);
  EXPECT_LT(finite_diff_check({x, k}, [&] {
              return mean_all(mul(depthwise_conv1d(x, k), depthwise_conv1d(x, k)));
            }).max_rel_err, kTol);
  auto img = Tensor::randn({2, 5, 4}, r);
  auto w = Tensor::randn({3, 2, 3, 3}, r);
  auto b = Tensor::randn({3}, r);
  EXPECT_LT(finite_diff_check({img, w, b}, [&] {
              return mean_all(mul(conv2d(img, w, b, 1), conv2d(img, w, b, 1)));
            }).max_rel_err, kTol);
  EXPECT_LT(finite_diff_check({img, w, b}, [&] {
              return mean_all(mul(conv2d(img, w, b, 2), conv2d(img, w, b, 2)));
            }).max_rel_err, kTol);
  auto w1 = Tensor::randn({3, 2, 1, 1}, r);
  EXPECT_LT(finite_diff_check({img, w1, b}, [&] {
              return mean_all(mul(conv2d(img, w1, b, 2), conv2d(img, w1, b, 2)));
            }).max_rel_err, kTol);
}

TEST(OpsGrad, AttentionAllPaths) {
  Rng r(26);
  auto q = Tensor::randn({3, 4}, r);
  auto k = Tensor::randn({5, 4}, r);
  auto v = Tensor::randn({5, 6}, r);
  EXPECT_LT(finite_diff_check({q, k, v}, [&] {
              auto y = multi_head_attention(q, k, v, 2);
              return mean_all(mul(y, y));
            }).max_rel_err, kTol);
  std::vector<uint8_t> blocked(15, 0);
  blocked[1] = blocked[7] = blocked[14] = 1;
  EXPECT_LT(finite_diff_check({q, k, v}, [&] {
              auto y = multi_head_attention(q, k, v, 2, &blocked);
              return mean_all(mul(y, y));
            }).max_rel_err, kTol);
  EXPECT_LT(finite_diff_check({q, k, v}, [&] {
              auto y = multi_head_attention(q, k, v, 2, nullptr, true);
              return mean_all(mul(y, y));
            }).max_rel_err, kTol);
}

TEST(OpsGrad, PoolingOps) {
  Rng r(27);
  auto x = Tensor::randn({2, 4, 3}, r);
  EXPECT_LT(finite_diff_check({x}, [&] {
              auto y = segmental_stat_pool(x);
              return mean_all(mul(y, y));
            }).max_rel_err, kTol);
  EXPECT_LT(finite_diff_check({x}, [&] {
              auto y = global_stat_pool(x);
              return mean_all(mul(y, y));
            }).max_rel_err, kTol);
}

TEST(OpsGrad, Losses) {
  Rng r(28);
  auto p = Tensor::randu({4, 5}, r, 0.05, 0.95);
  auto y = Tensor::create({4, 5});
  for (auto& v : y->data) v = r.uniform() < 0.5 ? 0.0 : 1.0;
  EXPECT_LT(finite_diff_check({p}, [&] { return bce_loss(p, y); }).max_rel_err, kTol);
  auto z = Tensor::randn({3, 6}, r);
  EXPECT_LT(finite_diff_check({z}, [&] { return cross_entropy_logits(z, {1, 0, 5}); }).max_rel_err, kTol);
  auto c = Tensor::randu({2, 4}, r, -0.8, 0.8);
  EXPECT_LT(finite_diff_check({c}, [&] {
              auto logits = arcface_margin(c, {2, 0}, 32.0, 0.2);
              return cross_entropy_logits(logits, {2, 0});
            }).max_rel_err, kTol);
}

TEST(OpsGrad, DropoutMaskRoutesGradient) {
  auto& tape = GradTape::active();
  tape.reset();
  Rng r(29);
  auto x = Tensor::full({20, 20}, 2.0);
  x->requires_grad = true;
  auto y = dropout(x, 0.4, true, &r);
  tape.backward(mean_all(y));
  // Kept entries have grad (1/keep)/n, dropped entries zero.
  const double keep_g = (1.0 / 0.6) / 400.0;
  int64_t kept = 0;
  for (size_t i = 0; i < y->data.size(); ++i) {
    if (y->data[i] != 0.0) {
      EXPECT_NEAR(x->grad[i], keep_g, 1e-12);
      ++kept;
    } else {
      EXPECT_DOUBLE_EQ(x->grad[i], 0.0);
    }
  }
  EXPECT_GT(kept, 150);
  tape.reset();
}

TEST(OpsGrad, StatPoolGradientFlowsToConstantChannel) {
  // Stddev of a constant channel sits at the eps floor; its gradient is
  // finite because of the eps term.
  auto& tape = GradTape::active();
  tape.reset();
  auto x = Tensor::full({1, 1, 4}, 3.0);
  x->requires_grad = true;
  auto y = segmental_stat_pool(x);
  tape.backward(sum_all(y));
  for (double g : x->grad) EXPECT_TRUE(std::isfinite(g));
  tape.reset();
}

}  // namespace
}  // namespace seqdiar
