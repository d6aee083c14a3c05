// seqdiar/frontend.hpp
//
// Residual convolutional speaker frontend.  A [T x H] filterbank matrix is
// treated as a single-channel image and reduced by four stages (strides 1,
// 2, 2, 2) to a [C x T/8 x H/8] map; time is zero-padded to a multiple of 8
// first.  From the map the frontend produces either per-frame
// representations (segmental statistics pooling, [T/8 x 2C]) or a single
// utterance embedding (global statistics pooling plus a linear projection,
// unit-normalised).  The classification head for embedding pre-training adds
// an angular margin on the cosine scores.

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

#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "seqdiar/layers.hpp"
#include "seqdiar/ops.hpp"

namespace seqdiar {

struct FrontendConfig {
  std::array<int, 4> widths = {64, 128, 256, 512};
  std::array<int, 4> blocks = {3, 4, 6, 3};
  int embed_dim = 256;

  int64_t frame_dim() const { return 2 * widths[3]; }
};

// conv -> per-channel norm; relu is applied by the caller where it belongs.
class ConvNorm {
 public:
  TensorPtr w, b, gamma, beta;
  int stride = 1;

  ConvNorm() = default;
  ConvNorm(int64_t cin, int64_t cout, int64_t ksize, int s, Rng& rng) : stride(s) {
    const double init = std::sqrt(2.0 / static_cast<double>(cin * ksize * ksize));
    w = Tensor::randn({cout, cin, ksize, ksize}, rng, init);
    b = Tensor::create({cout});
    gamma = Tensor::full({cout}, 1.0);
    beta = Tensor::create({cout});
    w->requires_grad = b->requires_grad = gamma->requires_grad = beta->requires_grad = true;
  }

  TensorPtr forward(const TensorPtr& x) const {
    return channel_norm(conv2d(x, w, b, stride), gamma, beta);
  }

  void collect(const std::string& prefix, ParamMap& pm) const {
    pm.add(prefix + ".w", w);
    pm.add(prefix + ".b", b);
    pm.add(prefix + ".gamma", gamma);
    pm.add(prefix + ".beta", beta);
  }
};

// Two 3x3 conv-norm units with a residual connection; a strided or
// channel-changing block projects the shortcut with a 1x1 conv.
class ResidualBlock {
 public:
  ConvNorm c1, c2;
  bool has_proj = false;
  ConvNorm proj;

  ResidualBlock() = default;
  ResidualBlock(int64_t cin, int64_t cout, int s, Rng& rng)
      : c1(cin, cout, 3, s, rng), c2(cout, cout, 3, 1, rng) {
    if (s != 1 || cin != cout) {
      has_proj = true;
      proj = ConvNorm(cin, cout, 1, s, rng);
    }
  }

  TensorPtr forward(const TensorPtr& x) const {
    auto h = c2.forward(relu3(c1.forward(x)));
    auto sc = has_proj ? proj.forward(x) : x;
    return relu3(add(h, sc));
  }

  void collect(const std::string& prefix, ParamMap& pm) const {
    c1.collect(prefix + ".c1", pm);
    c2.collect(prefix + ".c2", pm);
    if (has_proj) proj.collect(prefix + ".proj", pm);
  }

 private:
  // relu works on any shape; this keeps 3-d maps as 3-d.
  static TensorPtr relu3(const TensorPtr& x) { return relu(x); }
};

class ResNetFrontend {
 public:
  FrontendConfig cfg;
  ConvNorm stem;
  std::vector<std::vector<ResidualBlock>> stages;
  LinearLayer embed;  // 2C -> embed_dim

  ResNetFrontend() = default;
  ResNetFrontend(const FrontendConfig& c, Rng& rng) : cfg(c) {
    stem = ConvNorm(1, c.widths[0], 3, 1, rng);
    int64_t cin = c.widths[0];
    for (int s = 0; s < 4; ++s) {
      const int stride = s == 0 ? 1 : 2;
      std::vector<ResidualBlock> stage;
      for (int bi = 0; bi < c.blocks[static_cast<size_t>(s)]; ++bi) {
        stage.emplace_back(cin, c.widths[static_cast<size_t>(s)], bi == 0 ? stride : 1, rng);
        cin = c.widths[static_cast<size_t>(s)];
      }
      stages.push_back(std::move(stage));
    }
    embed = LinearLayer(c.frame_dim(), c.embed_dim, rng);
  }

  // Output dims of feature_map for a [t x h] input, without running it.
  std::array<int64_t, 3> map_shape(int64_t t, int64_t h) const {
    const int64_t tp = (t + 7) / 8 * 8;
    return {cfg.widths[3], tp / 8, (h + 7) / 8};
  }

  // [T x H] features -> [C x ceil(T/8) x ceil(H/8)] map.
  TensorPtr feature_map(const TensorPtr& feats) const {
    if (feats->ndim() != 2) throw ShapeError("feature_map: need [T x H] features");
    const int64_t t = feats->dim(0), h = feats->dim(1);
    if (t < 1) throw ShapeError("feature_map: empty input");
    const int64_t tp = (t + 7) / 8 * 8;
    auto x = feats;
    if (tp != t) x = pad_rows(x, tp);
    x = reshape(x, {1, tp, h});
    x = relu(stem.forward(x));
    for (const auto& stage : stages)
      for (const auto& block : stage) x = block.forward(x);
    return x;
  }

  // Frame-level representations [ceil(T/8) x 2C].
  TensorPtr frame_representations(const TensorPtr& feats) const {
    return segmental_stat_pool(feature_map(feats));
  }

  // Utterance embedding [1 x embed_dim].
  TensorPtr embedding(const TensorPtr& feats, bool normalize = true) const {
    auto e = embed.forward(global_stat_pool(feature_map(feats)));
    return normalize ? l2_normalize_rows(e) : e;
  }

  void collect(const std::string& prefix, ParamMap& pm) const {
    stem.collect(prefix + ".stem", pm);
    for (size_t s = 0; s < stages.size(); ++s)
      for (size_t bi = 0; bi < stages[s].size(); ++bi)
        stages[s][bi].collect(prefix + ".s" + std::to_string(s) + ".b" + std::to_string(bi), pm);
    embed.collect(prefix + ".embed", pm);
  }

  void set_trainable(bool trainable) {
    ParamMap pm;
    collect("f", pm);
    seqdiar::set_trainable(pm, trainable);
  }
};

// Margin classification head for embedding pre-training.
class ArcFaceHead {
 public:
  TensorPtr w;  // [num_classes x embed_dim]
  double scale = 32.0;
  double margin = 0.2;

  ArcFaceHead() = default;
  ArcFaceHead(int64_t num_classes, int64_t embed_dim, Rng& rng, double s = 32.0, double m = 0.2)
      : scale(s), margin(m) {
    w = Tensor::randn({num_classes, embed_dim}, rng, 1.0 / std::sqrt(static_cast<double>(embed_dim)));
    w->requires_grad = true;
  }

  // e_norm: unit-normalised embeddings [B x S].
  TensorPtr logits(const TensorPtr& e_norm, const std::vector<int64_t>& labels) const {
    auto cosines = matmul(e_norm, transpose(l2_normalize_rows(w)));
    return arcface_margin(cosines, labels, scale, margin);
  }

  void collect(const std::string& prefix, ParamMap& pm) const { pm.add(prefix + ".w", w); }
};

}  // namespace seqdiar
