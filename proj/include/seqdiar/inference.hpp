// seqdiar/inference.hpp
//
// End-to-end diarization of a recording:
//   1. VAD (energy-based, or caller-supplied oracle intervals),
//   2. first-pass clustering of windowed speaker embeddings,
//   3. profile extraction from single-speaker regions,
//   4. chunked target-speaker decoding, one pass per profile group,
//   5. stitching chunk posteriors and VAD-gated binarization.
//
// Everything is deterministic given (audio, weights, config): there is no
// sampling anywhere in this path.

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

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "seqdiar/annotation.hpp"
#include "seqdiar/clustering.hpp"
#include "seqdiar/features.hpp"
#include "seqdiar/model.hpp"

namespace seqdiar {

struct InferenceConfig {
  double window = 1.5;         // seconds per embedding window
  double window_shift = 0.75;
  double min_window = 0.1;     // windows shorter than this are skipped
  double ahc_threshold = 0.3;  // cosine-distance merge cutoff
  double min_solo = 2.0;       // seconds of single-speaker speech to keep a profile
  int64_t l_dec = 0;           // slots per decoding group; 0: model capacity
  double binarize_threshold = 0.5;
  double merge_gap = 0.1;      // close gaps shorter than this
  double min_segment = 0.1;    // then drop segments shorter than this
  VadConfig vad{};
  FbankConfig fbank{};
};

using VadIntervals = std::vector<std::pair<double, double>>;

inline Timeline timeline_from_vad(const VadIntervals& vad) {
  std::vector<Interval> iv;
  iv.reserve(vad.size());
  for (const auto& [a, b] : vad) iv.push_back({a, b});
  return Timeline(std::move(iv));
}

inline Waveform slice_wave(const Waveform& w, double a, double b) {
  const auto n = static_cast<int64_t>(w.samples.size());
  const int64_t lo = std::clamp<int64_t>(static_cast<int64_t>(std::llround(a * w.sample_rate)), 0, n);
  const int64_t hi = std::clamp<int64_t>(static_cast<int64_t>(std::llround(b * w.sample_rate)), lo, n);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(w.samples.begin() + lo, w.samples.begin() + hi);
  return out;
}

inline Waveform concat_intervals(const Waveform& w, const Timeline& tl) {
  Waveform out;
  out.sample_rate = w.sample_rate;
  for (const auto& i : tl.iv) {
    const Waveform piece = slice_wave(w, i.a, i.b);
    out.samples.insert(out.samples.end(), piece.samples.begin(), piece.samples.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// First pass: clustering-based diarization

// Embedding windows tiling the VAD intervals.
inline std::vector<Interval> embedding_windows(const VadIntervals& vad,
                                               const InferenceConfig& cfg) {
  std::vector<Interval> wins;
  for (const auto& [a, b] : vad) {
    if (b - a <= cfg.window) {
      if (b - a >= cfg.min_window) wins.push_back({a, b});
      continue;
    }
    for (double start = a; start < b; start += cfg.window_shift) {
      const double end = std::min(start + cfg.window, b);
      if (end - start >= cfg.min_window) wins.push_back({start, end});
      if (end >= b) break;
    }
  }
  return wins;
}

inline std::vector<double> window_embedding(const Waveform& w, double a, double b,
                                            const ResNetFrontend& frontend,
                                            const FbankConfig& fb) {
  const auto e = frontend.embedding(fbank(slice_wave(w, a, b), fb));
  return e->data;
}

// Clusters 1.5 s / 0.75 s windows of the VAD regions by frontend embedding and
// merges same-cluster windows into anonymous speakers "s0", "s1", ...
// numbered by first appearance.
inline Annotation initial_diarization(const Waveform& w, const ResNetFrontend& frontend,
                                      const VadIntervals& vad, const InferenceConfig& cfg) {
  NoGradGuard ng;
  const auto wins = embedding_windows(vad, cfg);
  Annotation ann;
  if (wins.empty()) return ann;

  std::vector<std::vector<double>> embs;
  embs.reserve(wins.size());
  for (const auto& win : wins)
    embs.push_back(window_embedding(w, win.a, win.b, frontend, cfg.fbank));
  const auto labels = ahc_average_linkage(embs, cfg.ahc_threshold);

  const int k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  for (int c = 0; c < k; ++c) {
    std::vector<Interval> iv;
    for (size_t i = 0; i < wins.size(); ++i)
      if (labels[i] == c) iv.push_back(wins[i]);
    const Timeline tl{std::move(iv)};
    for (const auto& i : tl.iv) ann.segments.push_back({"s" + std::to_string(c), i.a, i.b});
  }
  ann.sort_by_onset();
  return ann;
}

inline Annotation initial_diarization(const Waveform& w, const ResNetFrontend& frontend,
                                      const InferenceConfig& cfg) {
  return initial_diarization(w, frontend, energy_vad(w, cfg.vad), cfg);
}

// ---------------------------------------------------------------------------
// Profile groups

struct ProfileGroup {
  TensorPtr profiles;                 // [l_dec x S], zero rows past speakers.size()
  std::vector<std::string> speakers;  // slot i belongs to speakers[i]
};
using ProfileGroups = std::vector<ProfileGroup>;

// Packs ordered (speaker, embedding) pairs into ceil(n / l_dec) groups of
// exactly l_dec slots, padding the tail with zero rows.  No speakers at all
// still yields one all-zero group, so decoding runs and returns silence.
inline ProfileGroups pack_groups(const std::vector<std::pair<std::string, std::vector<double>>>& ordered,
                                 int64_t l_dec, int64_t embed_dim) {
  if (l_dec < 1) throw ContractError("pack_groups: l_dec must be positive");
  for (const auto& [id, e] : ordered)
    if (static_cast<int64_t>(e.size()) != embed_dim)
      throw ContractError("pack_groups: embedding width mismatch for " + id);
  const size_t n = ordered.size();
  const size_t num_groups = std::max<size_t>(1, (n + static_cast<size_t>(l_dec) - 1) / static_cast<size_t>(l_dec));
  ProfileGroups groups(num_groups);
  for (size_t g = 0; g < num_groups; ++g) {
    groups[g].profiles = Tensor::create({l_dec, embed_dim});
    for (int64_t slot = 0; slot < l_dec; ++slot) {
      const size_t idx = g * static_cast<size_t>(l_dec) + static_cast<size_t>(slot);
      if (idx >= n) break;
      groups[g].speakers.push_back(ordered[idx].first);
      for (int64_t d = 0; d < embed_dim; ++d)
        groups[g].profiles->at(slot, d) = ordered[idx].second[static_cast<size_t>(d)];
    }
  }
  return groups;
}

// Embeds each speaker from its single-speaker regions.  Speakers with less
// than min_solo seconds of solo speech are dropped; the rest are ordered by
// total speech descending (id ascending on ties) and packed into groups.
inline ProfileGroups extract_profiles(const Waveform& w, const Annotation& ann,
                                      const ResNetFrontend& frontend, int64_t l_dec,
                                      const InferenceConfig& cfg) {
  NoGradGuard ng;
  const auto ids = ann.speakers();
  struct Cand {
    std::string id;
    double talk = 0.0;
    std::vector<double> emb;
  };
  std::vector<Cand> kept;
  for (const auto& id : ids) {
    const Timeline mine = ann.speaker_timeline(id);
    Timeline others;
    for (const auto& other : ids)
      if (other != id) others = others.unite(ann.speaker_timeline(other));
    const Timeline solo = mine.subtract(others);
    if (solo.total() < cfg.min_solo) continue;
    const Waveform solo_audio = concat_intervals(w, solo);
    kept.push_back({id, mine.total(),
                    frontend.embedding(fbank(solo_audio, cfg.fbank))->data});
  }
  std::sort(kept.begin(), kept.end(), [](const Cand& x, const Cand& y) {
    if (x.talk != y.talk) return x.talk > y.talk;
    return x.id < y.id;
  });
  std::vector<std::pair<std::string, std::vector<double>>> ordered;
  ordered.reserve(kept.size());
  for (auto& c : kept) ordered.emplace_back(c.id, std::move(c.emb));
  return pack_groups(ordered, l_dec, frontend.cfg.embed_dim);
}

// ---------------------------------------------------------------------------
// Chunked decoding

struct ChunkPrediction {
  double chunk_start = 0.0;  // seconds
  TensorPtr probabilities;   // [l_dec x t_eff], truncated to the true duration
  int group = 0;
};

// Tiles the recording with non-overlapping model-sized chunks (the final one
// zero-padded), decodes every group on every chunk, and truncates the last
// chunk's frames back to the true duration.
inline std::vector<ChunkPrediction> chunked_infer(const Waveform& w, const ProfileGroups& groups,
                                                  const Seq2SeqTsvad& model,
                                                  const InferenceConfig& cfg) {
  NoGradGuard ng;
  RunContext ctx{false, nullptr};
  std::vector<ChunkPrediction> preds;
  const auto n = static_cast<int64_t>(w.samples.size());
  if (n == 0 || groups.empty()) return preds;
  const int64_t chunk_samples =
      static_cast<int64_t>(std::llround(model.cfg.chunk_seconds * w.sample_rate));
  const int64_t t_out = model.cfg.output_frames();
  const double r = model.cfg.output_resolution;

  for (int64_t start = 0; start < n; start += chunk_samples) {
    Waveform chunk;
    chunk.sample_rate = w.sample_rate;
    const int64_t hi = std::min(start + chunk_samples, n);
    chunk.samples.assign(w.samples.begin() + start, w.samples.begin() + hi);
    chunk.samples.resize(static_cast<size_t>(chunk_samples), 0.0);
    const auto feats = fbank(chunk, cfg.fbank);

    const double remaining = static_cast<double>(n - start) / w.sample_rate;
    const auto t_eff = std::min<int64_t>(
        t_out, static_cast<int64_t>(std::ceil(remaining / r - 1e-9)));

    for (size_t g = 0; g < groups.size(); ++g) {
      const auto full = model.forward(feats, groups[g].profiles, ctx);  // [l_dec x t_out]
      auto cut = Tensor::create({full->dim(0), t_eff});
      for (int64_t s = 0; s < full->dim(0); ++s)
        for (int64_t t = 0; t < t_eff; ++t) cut->at(s, t) = full->at(s, t);
      preds.push_back({static_cast<double>(start) / w.sample_rate, cut, static_cast<int>(g)});
    }
  }
  return preds;
}

// ---------------------------------------------------------------------------
// Stitching

struct StitchedPrediction {
  std::vector<std::string> speakers;  // row order
  TensorPtr probs;                    // [n_speakers x T_total]
};

// Concatenates chunk posteriors along time and maps group slots back to
// global speakers.  The chunks of every group must tile [0, duration) exactly.
inline StitchedPrediction stitch(const std::vector<ChunkPrediction>& preds,
                                 const ProfileGroups& groups, double resolution) {
  if (preds.empty()) throw ContractError("stitch: no predictions");

  // Per-group chunk lists, each sorted by start time.
  std::vector<std::vector<const ChunkPrediction*>> by_group(groups.size());
  for (const auto& p : preds) {
    if (p.group < 0 || static_cast<size_t>(p.group) >= groups.size())
      throw ContractError("stitch: prediction references unknown group");
    by_group[static_cast<size_t>(p.group)].push_back(&p);
  }
  for (auto& list : by_group) {
    std::sort(list.begin(), list.end(),
              [](const ChunkPrediction* a, const ChunkPrediction* b) {
                return a->chunk_start < b->chunk_start;
              });
  }

  // Validate the tiling against group 0, then check the others match it.
  const auto& base = by_group[0];
  if (base.empty()) throw ContractError("stitch: group 0 has no chunks");
  std::vector<int64_t> offsets(base.size());
  int64_t t_total = 0;
  double expect_start = 0.0;
  for (size_t i = 0; i < base.size(); ++i) {
    if (std::fabs(base[i]->chunk_start - expect_start) > 1e-6)
      throw ContractError("stitch: chunks must tile the recording without gaps or overlap");
    offsets[i] = t_total;
    t_total += base[i]->probabilities->dim(1);
    expect_start = base[i]->chunk_start + resolution * static_cast<double>(base[i]->probabilities->dim(1));
  }
  for (size_t g = 1; g < by_group.size(); ++g) {
    if (by_group[g].size() != base.size())
      throw ContractError("stitch: group chunk counts differ");
    for (size_t i = 0; i < base.size(); ++i)
      if (std::fabs(by_group[g][i]->chunk_start - base[i]->chunk_start) > 1e-9 ||
          by_group[g][i]->probabilities->dim(1) != base[i]->probabilities->dim(1))
        throw ContractError("stitch: group chunk layouts differ");
  }

  StitchedPrediction out;
  for (const auto& g : groups)
    out.speakers.insert(out.speakers.end(), g.speakers.begin(), g.speakers.end());
  out.probs = Tensor::create({static_cast<int64_t>(out.speakers.size()), t_total});

  int64_t row0 = 0;
  for (size_t g = 0; g < groups.size(); ++g) {
    const auto rows = static_cast<int64_t>(groups[g].speakers.size());
    for (size_t i = 0; i < by_group[g].size(); ++i) {
      const auto& p = *by_group[g][i];
      for (int64_t s = 0; s < rows; ++s)  // padded slots are dropped here
        for (int64_t t = 0; t < p.probabilities->dim(1); ++t)
          out.probs->at(row0 + s, offsets[i] + t) = p.probabilities->at(s, t);
    }
    row0 += rows;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binarization

// VAD-gated decisions: inside speech, a speaker is active where its posterior
// clears the threshold, and the best-scoring speaker is active regardless, so
// every speech frame gets at least one label.  Outside speech everything is
// zeroed.  Short gaps are closed, then short segments dropped; clipping to
// the VAD intervals afterwards keeps the no-speech-outside-VAD guarantee.
inline Annotation postprocess(const StitchedPrediction& sp, const VadIntervals& vad,
                              double resolution, const InferenceConfig& cfg) {
  Annotation ann;
  const auto n = static_cast<int64_t>(sp.speakers.size());
  if (n == 0) return ann;
  const int64_t t_len = sp.probs->dim(1);
  const Timeline speech = timeline_from_vad(vad);

  std::vector<int64_t> argmax(static_cast<size_t>(t_len), 0);
  std::vector<char> active(static_cast<size_t>(t_len), 0);
  for (int64_t t = 0; t < t_len; ++t) {
    active[static_cast<size_t>(t)] =
        speech.contains((static_cast<double>(t) + 0.5) * resolution) ? 1 : 0;
    int64_t best = 0;
    for (int64_t s = 1; s < n; ++s)
      if (sp.probs->at(s, t) > sp.probs->at(best, t)) best = s;
    argmax[static_cast<size_t>(t)] = best;
  }

  for (int64_t s = 0; s < n; ++s) {
    std::vector<Interval> frames;
    for (int64_t t = 0; t < t_len; ++t) {
      if (!active[static_cast<size_t>(t)]) continue;
      if (sp.probs->at(s, t) >= cfg.binarize_threshold || argmax[static_cast<size_t>(t)] == s)
        frames.push_back({static_cast<double>(t) * resolution,
                          (static_cast<double>(t) + 1.0) * resolution});
    }
    Timeline tl{std::move(frames)};

    std::vector<Interval> merged;
    for (const auto& i : tl.iv) {
      if (!merged.empty() && i.a - merged.back().b < cfg.merge_gap)
        merged.back().b = i.b;
      else
        merged.push_back(i);
    }
    Timeline clipped = Timeline(std::move(merged)).intersect(speech);
    for (const auto& i : clipped.iv)
      if (i.length() >= cfg.min_segment - 1e-9)
        ann.segments.push_back({sp.speakers[static_cast<size_t>(s)], i.a, i.b});
  }
  ann.sort_by_onset();
  return ann;
}

// ---------------------------------------------------------------------------
// Full pipeline

struct DiarizationResult {
  Annotation annotation;
  Annotation initial;  // first-pass clustering result
  ProfileGroups groups;
  StitchedPrediction stitched;
  VadIntervals vad;
};

// oracle_vad substitutes the reference speech regions for the energy VAD;
// oracle_groups bypasses the first pass entirely (profiles from a known bank).
inline DiarizationResult diarize(const Waveform& w, const Seq2SeqTsvad& model,
                                 const InferenceConfig& cfg,
                                 const VadIntervals* oracle_vad = nullptr,
                                 const ProfileGroups* oracle_groups = nullptr) {
  DiarizationResult res;
  if (w.samples.empty()) return res;
  res.vad = oracle_vad ? *oracle_vad : energy_vad(w, cfg.vad);
  const int64_t l_dec = cfg.l_dec > 0 ? cfg.l_dec : model.cfg.decoder.num_slots;
  if (oracle_groups) {
    res.groups = *oracle_groups;
  } else {
    res.initial = initial_diarization(w, model.frontend, res.vad, cfg);
    res.groups = extract_profiles(w, res.initial, model.frontend, l_dec, cfg);
  }
  const auto preds = chunked_infer(w, res.groups, model, cfg);
  res.stitched = stitch(preds, res.groups, model.cfg.output_resolution);
  res.annotation = postprocess(res.stitched, res.vad, model.cfg.output_resolution, cfg);
  return res;
}

}  // namespace seqdiar
