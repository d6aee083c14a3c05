// seqdiar/decoder.hpp
//
// Speaker-wise activity decoder.  N profile embeddings enter as a [N x S]
// matrix; the decoder state starts at zero, and each block applies
// speaker-axis self-attention, cross-attention into the encoded frames, and
// a feed-forward, all with residual connections and pre-norms.  Queries and
// keys of both attentions are concatenated with per-block projections of the
// profile embeddings, and cross-attention keys are additionally concatenated
// with the encoder's positional matrix.  Slot order carries no information:
// the only op that mixes slots is the self-attention, which runs with
// order-invariant reductions, so permuting profile rows permutes the output
// rows bit-exactly in evaluation mode.
//
// The activity head is one linear layer from the decoder dim to the output
// frame count followed by a sigmoid; the temporal resolution of the system
// is set here and nowhere else.

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

#include <string>
#include <vector>

#include "seqdiar/conformer.hpp"
#include "seqdiar/layers.hpp"
#include "seqdiar/ops.hpp"

namespace seqdiar {

struct DecoderConfig {
  int64_t dim = 512;       // must match the encoder dim
  int num_blocks = 6;
  int heads = 8;
  int64_t ffn_dim = 1024;
  double dropout = 0.1;
  int64_t embed_dim = 256;  // S: profile embedding width
  int64_t num_slots = 4;    // N: decoder capacity per pass
};

// Two linears with a layer norm and relu between: S -> D.
class SpeakerMlp {
 public:
  LinearLayer l1;
  LayerNormLayer ln;
  LinearLayer l2;

  SpeakerMlp() = default;
  SpeakerMlp(int64_t in, int64_t out, Rng& rng) : l1(in, out, rng), ln(out), l2(out, out, rng) {}

  TensorPtr forward(const TensorPtr& e) const { return l2.forward(relu(ln.forward(l1.forward(e)))); }

  void collect(const std::string& prefix, ParamMap& pm) const {
    l1.collect(prefix + ".l1", pm);
    ln.collect(prefix + ".ln", pm);
    l2.collect(prefix + ".l2", pm);
  }
};

class DecoderBlock {
 public:
  SpeakerMlp spk_proj;  // S -> D, per block
  LayerNormLayer ln_self;
  LinearLayer self_wq, self_wk;  // 2D -> 2D on [state, spk] concatenations
  LinearLayer self_wv, self_wo;  // D -> D
  LayerNormLayer ln_cross;
  LinearLayer cross_wq, cross_wk;  // 2D -> 2D
  LinearLayer cross_wv, cross_wo;  // D -> D
  LayerNormLayer ln_ff;
  LinearLayer ff1, ff2;
  int heads = 8;
  double dropout_p = 0.0;

  DecoderBlock() = default;
  DecoderBlock(const DecoderConfig& c, Rng& rng)
      : spk_proj(c.embed_dim, c.dim, rng),
        ln_self(c.dim),
        self_wq(2 * c.dim, 2 * c.dim, rng),
        self_wk(2 * c.dim, 2 * c.dim, rng),
        self_wv(c.dim, c.dim, rng),
        self_wo(c.dim, c.dim, rng),
        ln_cross(c.dim),
        cross_wq(2 * c.dim, 2 * c.dim, rng),
        cross_wk(2 * c.dim, 2 * c.dim, rng),
        cross_wv(c.dim, c.dim, rng),
        cross_wo(c.dim, c.dim, rng),
        ln_ff(c.dim),
        ff1(c.dim, c.ffn_dim, rng),
        ff2(c.ffn_dim, c.dim, rng),
        heads(c.heads),
        dropout_p(c.dropout) {}

  TensorPtr forward(const TensorPtr& state_in, const TensorPtr& profiles,
                    const EncodedSequence& enc, const RunContext& ctx) const {
    auto spk = spk_proj.forward(profiles);  // [N x D]

    // Speaker-axis self-attention; the one slot-mixing op, kept bit-exactly
    // permutation-equivariant via order-invariant reductions.
    auto h = ln_self.forward(state_in);
    auto qk = concat_cols(h, spk);  // [N x 2D]
    auto a = multi_head_attention(self_wq.forward(qk), self_wk.forward(qk), self_wv.forward(h),
                                  heads, nullptr, /*order_invariant=*/true);
    auto state = add(state_in, dropout(self_wo.forward(a), dropout_p, ctx.training, ctx.rng));

    // Cross-attention into the encoded frames; keys carry the positions.
    auto h2 = ln_cross.forward(state);
    auto q2 = concat_cols(h2, spk);
    auto kc = concat_cols(enc.values, enc.positions);  // [T x 2D]
    auto a2 = multi_head_attention(cross_wq.forward(q2), cross_wk.forward(kc),
                                   cross_wv.forward(enc.values), heads);
    state = add(state, dropout(cross_wo.forward(a2), dropout_p, ctx.training, ctx.rng));

    auto f = ff2.forward(dropout(relu(ff1.forward(ln_ff.forward(state))), dropout_p, ctx.training,
                                 ctx.rng));
    return add(state, dropout(f, dropout_p, ctx.training, ctx.rng));
  }

  void collect(const std::string& prefix, ParamMap& pm) const {
    spk_proj.collect(prefix + ".spk", pm);
    ln_self.collect(prefix + ".ln_self", pm);
    self_wq.collect(prefix + ".self_wq", pm);
    self_wk.collect(prefix + ".self_wk", pm);
    self_wv.collect(prefix + ".self_wv", pm);
    self_wo.collect(prefix + ".self_wo", pm);
    ln_cross.collect(prefix + ".ln_cross", pm);
    cross_wq.collect(prefix + ".cross_wq", pm);
    cross_wk.collect(prefix + ".cross_wk", pm);
    cross_wv.collect(prefix + ".cross_wv", pm);
    cross_wo.collect(prefix + ".cross_wo", pm);
    ln_ff.collect(prefix + ".ln_ff", pm);
    ff1.collect(prefix + ".ff1", pm);
    ff2.collect(prefix + ".ff2", pm);
  }
};

class SpeakerwiseDecoder {
 public:
  DecoderConfig cfg;
  std::vector<DecoderBlock> blocks;
  LayerNormLayer final_ln;

  SpeakerwiseDecoder() = default;
  SpeakerwiseDecoder(const DecoderConfig& c, Rng& rng) : cfg(c), final_ln(c.dim) {
    for (int i = 0; i < c.num_blocks; ++i) blocks.emplace_back(c, rng);
  }

  // profiles: [N x S] with zero rows for empty slots.  Returns [N x D].
  TensorPtr decode(const TensorPtr& profiles, const EncodedSequence& enc,
                   const RunContext& ctx) const {
    if (profiles->ndim() != 2 || profiles->dim(1) != cfg.embed_dim)
      throw ShapeError("decode: profiles must be [N x " + std::to_string(cfg.embed_dim) + "]");
    if (enc.values->dim(1) != cfg.dim) throw ShapeError("decode: encoder dim mismatch");
    auto state = Tensor::create({profiles->dim(0), cfg.dim});  // zero-initialised slots
    for (const auto& b : blocks) state = b.forward(state, profiles, enc, ctx);
    return final_ln.forward(state);
  }

  void collect(const std::string& prefix, ParamMap& pm) const {
    for (size_t i = 0; i < blocks.size(); ++i)
      blocks[i].collect(prefix + ".b" + std::to_string(i), pm);
    final_ln.collect(prefix + ".final_ln", pm);
  }
};

// One linear D -> T_out plus sigmoid.  T_out = chunk frames at the output
// resolution; nothing upstream depends on it.
class ActivityHead {
 public:
  LinearLayer proj;
  int64_t out_frames = 0;

  ActivityHead() = default;
  ActivityHead(int64_t dim, int64_t t_out, Rng& rng) : proj(dim, t_out, rng), out_frames(t_out) {}

  // [N x D] -> [N x T_out] activity probabilities.
  TensorPtr forward(const TensorPtr& e_dec) const { return sigmoid(proj.forward(e_dec)); }

  void collect(const std::string& prefix, ParamMap& pm) const { proj.collect(prefix + ".proj", pm); }
};

}  // namespace seqdiar
