// seqdiar/conformer.hpp
//
// Convolution-augmented transformer encoder over frame representations.
// Each block applies, with residual connections: half-step feed-forward,
// self-attention, a depthwise convolution module, a second half-step
// feed-forward, then a final layer norm.  Absolute sinusoidal positions are
// added once at the input; the position matrix is returned alongside the
// encoded values so downstream cross-attention can re-use it for its keys.

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

#include <cmath>
#include <string>
#include <vector>

#include "seqdiar/layers.hpp"
#include "seqdiar/ops.hpp"

namespace seqdiar {

struct EncoderConfig {
  int64_t dim = 512;
  int num_blocks = 6;
  int heads = 8;
  int64_t ffn_dim = 1024;
  double dropout = 0.1;
  int64_t conv_kernel = 15;
};

// pe[t, 2i] = sin(t / 10000^(2i/D)), pe[t, 2i+1] = cos(t / 10000^(2i/D)).
inline TensorPtr sinusoidal_positions(int64_t t_len, int64_t dim) {
  auto pe = Tensor::create({t_len, dim});
  for (int64_t t = 0; t < t_len; ++t)
    for (int64_t i = 0; i < dim; i += 2) {
      const double rate = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
      const double a = static_cast<double>(t) * rate;
      pe->at(t, i) = std::sin(a);
      if (i + 1 < dim) pe->at(t, i + 1) = std::cos(a);
    }
  return pe;
}

class FeedForwardModule {
 public:
  LayerNormLayer ln;
  LinearLayer l1, l2;
  double dropout_p = 0.0;

  FeedForwardModule() = default;
  FeedForwardModule(int64_t dim, int64_t ffn_dim, double p, Rng& rng)
      : ln(dim), l1(dim, ffn_dim, rng), l2(ffn_dim, dim, rng), dropout_p(p) {}

  TensorPtr forward(const TensorPtr& x, const RunContext& ctx) const {
    auto h = dropout(swish(l1.forward(ln.forward(x))), dropout_p, ctx.training, ctx.rng);
    return dropout(l2.forward(h), dropout_p, ctx.training, ctx.rng);
  }

  void collect(const std::string& prefix, ParamMap& pm) const {
    ln.collect(prefix + ".ln", pm);
    l1.collect(prefix + ".l1", pm);
    l2.collect(prefix + ".l2", pm);
  }
};

class SelfAttentionModule {
 public:
  LayerNormLayer ln;
  LinearLayer wq, wk, wv, wo;
  int heads = 8;
  double dropout_p = 0.0;

  SelfAttentionModule() = default;
  SelfAttentionModule(int64_t dim, int h, double p, Rng& rng)
      : ln(dim), wq(dim, dim, rng), wk(dim, dim, rng), wv(dim, dim, rng), wo(dim, dim, rng),
        heads(h), dropout_p(p) {}

  TensorPtr forward(const TensorPtr& x, const RunContext& ctx) const {
    auto h = ln.forward(x);
    auto a = multi_head_attention(wq.forward(h), wk.forward(h), wv.forward(h), heads);
    return dropout(wo.forward(a), dropout_p, ctx.training, ctx.rng);
  }

  void collect(const std::string& prefix, ParamMap& pm) const {
    ln.collect(prefix + ".ln", pm);
    wq.collect(prefix + ".wq", pm);
    wk.collect(prefix + ".wk", pm);
    wv.collect(prefix + ".wv", pm);
    wo.collect(prefix + ".wo", pm);
  }
};

class ConvModule {
 public:
  LayerNormLayer ln;
  LinearLayer pw1;        // dim -> 2*dim, gated down to dim
  TensorPtr dw_kernel;    // [K x dim]
  LayerNormLayer norm2;   // after the depthwise conv
  LinearLayer pw2;        // dim -> dim
  double dropout_p = 0.0;

  ConvModule() = default;
  ConvModule(int64_t dim, int64_t kernel, double p, Rng& rng)
      : ln(dim), pw1(dim, 2 * dim, rng), norm2(dim), pw2(dim, dim, rng), dropout_p(p) {
    if (kernel % 2 == 0) throw ConfigError("ConvModule: kernel must be odd");
    dw_kernel = Tensor::randn({kernel, dim}, rng, 1.0 / std::sqrt(static_cast<double>(kernel)));
    dw_kernel->requires_grad = true;
  }

  TensorPtr forward(const TensorPtr& x, const RunContext& ctx) const {
    auto h = glu(pw1.forward(ln.forward(x)));
    h = swish(norm2.forward(depthwise_conv1d(h, dw_kernel)));
    return dropout(pw2.forward(h), dropout_p, ctx.training, ctx.rng);
  }

  void collect(const std::string& prefix, ParamMap& pm) const {
    ln.collect(prefix + ".ln", pm);
    pw1.collect(prefix + ".pw1", pm);
    pm.add(prefix + ".dw", dw_kernel);
    norm2.collect(prefix + ".norm2", pm);
    pw2.collect(prefix + ".pw2", pm);
  }
};

class ConformerBlock {
 public:
  FeedForwardModule ff1, ff2;
  SelfAttentionModule att;
  ConvModule conv;
  LayerNormLayer final_ln;

  ConformerBlock() = default;
  ConformerBlock(const EncoderConfig& c, Rng& rng)
      : ff1(c.dim, c.ffn_dim, c.dropout, rng),
        ff2(c.dim, c.ffn_dim, c.dropout, rng),
        att(c.dim, c.heads, c.dropout, rng),
        conv(c.dim, c.conv_kernel, c.dropout, rng),
        final_ln(c.dim) {}

  TensorPtr forward(const TensorPtr& x_in, const RunContext& ctx) const {
    auto x = add(x_in, scale(ff1.forward(x_in, ctx), 0.5));
    x = add(x, att.forward(x, ctx));
    x = add(x, conv.forward(x, ctx));
    x = add(x, scale(ff2.forward(x, ctx), 0.5));
    return final_ln.forward(x);
  }

  void collect(const std::string& prefix, ParamMap& pm) const {
    ff1.collect(prefix + ".ff1", pm);
    att.collect(prefix + ".att", pm);
    conv.collect(prefix + ".conv", pm);
    ff2.collect(prefix + ".ff2", pm);
    final_ln.collect(prefix + ".final_ln", pm);
  }
};

struct EncodedSequence {
  TensorPtr values;     // [T x D]
  TensorPtr positions;  // [T x D], the matrix added at the encoder input
};

class ConformerEncoder {
 public:
  EncoderConfig cfg;
  LinearLayer input;  // frame dim -> model dim
  std::vector<ConformerBlock> blocks;

  ConformerEncoder() = default;
  ConformerEncoder(int64_t in_dim, const EncoderConfig& c, Rng& rng) : cfg(c), input(in_dim, c.dim, rng) {
    for (int i = 0; i < c.num_blocks; ++i) blocks.emplace_back(c, rng);
  }

  EncodedSequence encode(const TensorPtr& reps, const RunContext& ctx) const {
    auto pos = sinusoidal_positions(reps->dim(0), cfg.dim);
    auto x = add(input.forward(reps), pos);
    for (const auto& b : blocks) x = b.forward(x, ctx);
    return {x, pos};
  }

  void collect(const std::string& prefix, ParamMap& pm) const {
    input.collect(prefix + ".input", pm);
    for (size_t i = 0; i < blocks.size(); ++i)
      blocks[i].collect(prefix + ".b" + std::to_string(i), pm);
  }
};

}  // namespace seqdiar
