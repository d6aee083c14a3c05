// seqdiar/model.hpp
//
// Full diarization model: frontend -> encoder -> speaker-wise decoder ->
// activity head.  The chunk geometry lives here: input frames are the chunk
// at the filterbank shift, output frames the chunk at the (coarser) output
// resolution.

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

#include "seqdiar/conformer.hpp"
#include "seqdiar/decoder.hpp"
#include "seqdiar/frontend.hpp"

namespace seqdiar {

struct ModelConfig {
  FrontendConfig frontend;
  EncoderConfig encoder;
  DecoderConfig decoder;
  double chunk_seconds = 16.0;
  double frame_shift = 0.01;        // filterbank hop
  double output_resolution = 0.08;  // seconds per output frame

  int64_t input_frames() const { return static_cast<int64_t>(std::llround(chunk_seconds / frame_shift)); }
  int64_t output_frames() const {
    return static_cast<int64_t>(std::llround(chunk_seconds / output_resolution));
  }

  void validate() const {
    if (encoder.dim != decoder.dim) throw ConfigError("encoder and decoder dims must match");
    if (decoder.embed_dim != frontend.embed_dim)
      throw ConfigError("decoder profile width must match the frontend embedding dim");
    const double k = chunk_seconds / output_resolution;
    if (std::fabs(k - std::llround(k)) > 1e-9)
      throw ConfigError("chunk must be an integer number of output frames");
    const double f = chunk_seconds / frame_shift;
    if (std::fabs(f - std::llround(f)) > 1e-9)
      throw ConfigError("chunk must be an integer number of input frames");
  }
};

class Seq2SeqTsvad {
 public:
  ModelConfig cfg;
  ResNetFrontend frontend;
  ConformerEncoder encoder;
  SpeakerwiseDecoder decoder;
  ActivityHead head;

  Seq2SeqTsvad() = default;
  // Parameter draw order is frontend, encoder, decoder, head.  The head is
  // last so models differing only in output resolution share every other
  // initial weight for the same seed.
  Seq2SeqTsvad(const ModelConfig& c, Rng& rng) : cfg(c) {
    cfg.validate();
    frontend = ResNetFrontend(c.frontend, rng);
    encoder = ConformerEncoder(c.frontend.frame_dim(), c.encoder, rng);
    decoder = SpeakerwiseDecoder(c.decoder, rng);
    head = ActivityHead(c.decoder.dim, c.output_frames(), rng);
  }

  // features [T x mel], profiles [N x S] -> activity probabilities
  // [N x output_frames].
  TensorPtr forward(const TensorPtr& features, const TensorPtr& profiles,
                    const RunContext& ctx) const {
    auto reps = frontend.frame_representations(features);
    auto enc = encoder.encode(reps, ctx);
    auto dec = decoder.decode(profiles, enc, ctx);
    return head.forward(dec);
  }

  void collect(const std::string& prefix, ParamMap& pm) const {
    frontend.collect(prefix + ".frontend", pm);
    encoder.collect(prefix + ".encoder", pm);
    decoder.collect(prefix + ".decoder", pm);
    head.collect(prefix + ".head", pm);
  }

  ParamMap params() const {
    ParamMap pm;
    collect("model", pm);
    return pm;
  }
};

}  // namespace seqdiar
