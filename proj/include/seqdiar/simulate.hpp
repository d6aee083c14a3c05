// seqdiar/simulate.hpp
//
// Synthetic speaker corpus, multi-speaker mixture simulation, activity-label
// generation at the output resolution, and profile augmentation for training.
//
// Voices are colored-noise-excited resonator filters: per speaker a spectral
// tilt plus three formant resonators drawn from a domain's ranges.  Two domain
// presets exist so a held-out, differently parameterized domain can stand in
// for out-of-domain "real" data.
//
// All randomness flows through a caller-provided Rng; draw order inside each
// operation is fixed, so (inputs, seed) fully determine every output.

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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "seqdiar/annotation.hpp"
#include "seqdiar/features.hpp"
#include "seqdiar/fft.hpp"
#include "seqdiar/rng.hpp"
#include "seqdiar/tensor.hpp"
#include "seqdiar/wav.hpp"

namespace seqdiar {

// ---------------------------------------------------------------------------
// Voice synthesis

struct VoiceParams {
  double f1 = 0, f2 = 0, f3 = 0;  // formant centers, Hz
  double b1 = 0, b2 = 0, b3 = 0;  // formant bandwidths, Hz
  double tilt = 0.0;              // one-pole lowpass coefficient on excitation
  double am_rate = 0.0;           // syllabic amplitude modulation, Hz
  double am_floor = 0.0;          // modulation trough, relative amplitude
};

// Sampling ranges for VoiceParams.  Presets differ enough that a model fit on
// one domain sees a genuine shift on the other.
struct VoiceDomain {
  double f1_lo, f1_hi, f2_lo, f2_hi, f3_lo, f3_hi;
  double b1_lo, b1_hi, b2_lo, b2_hi, b3_lo, b3_hi;
  double tilt_lo, tilt_hi;
  double am_rate_lo, am_rate_hi, am_floor_lo, am_floor_hi;
  std::string name;

  static VoiceDomain simulated() {
    return {280, 850, 900, 2100, 2300, 3200, 50, 90, 80, 140, 120, 220,
            0.90, 0.97, 2.0, 5.0, 0.35, 0.55, "simulated"};
  }
  static VoiceDomain held_out() {
    return {350, 950, 1100, 2400, 2600, 3600, 70, 120, 110, 180, 160, 280,
            0.80, 0.92, 3.0, 7.0, 0.25, 0.45, "held_out"};
  }
};

inline VoiceParams draw_voice(const VoiceDomain& d, Rng& rng) {
  VoiceParams v;
  v.f1 = rng.uniform(d.f1_lo, d.f1_hi);
  v.f2 = rng.uniform(d.f2_lo, d.f2_hi);
  v.f3 = rng.uniform(d.f3_lo, d.f3_hi);
  v.b1 = rng.uniform(d.b1_lo, d.b1_hi);
  v.b2 = rng.uniform(d.b2_lo, d.b2_hi);
  v.b3 = rng.uniform(d.b3_lo, d.b3_hi);
  v.tilt = rng.uniform(d.tilt_lo, d.tilt_hi);
  v.am_rate = rng.uniform(d.am_rate_lo, d.am_rate_hi);
  v.am_floor = rng.uniform(d.am_floor_lo, d.am_floor_hi);
  return v;
}

// In-place two-pole resonator at center f, bandwidth b.
inline void resonate(std::vector<double>& x, double f, double b, double sr) {
  const double r = std::exp(-M_PI * b / sr);
  const double c1 = 2.0 * r * std::cos(2.0 * M_PI * f / sr);
  const double c2 = -r * r;
  double y1 = 0.0, y2 = 0.0;
  for (auto& s : x) {
    const double y = s + c1 * y1 + c2 * y2;
    y2 = y1;
    y1 = y;
    s = y;
  }
}

// One utterance: leading/trailing silence pads around `speech_dur` seconds of
// amplitude-modulated voiced signal.  Pads exist so VAD trimming in the corpus
// builder is exercised; the modulation trough stays above zero so the speech
// interior never falls silent.
inline Waveform synth_utterance(const VoiceParams& v, double speech_dur, Rng& rng,
                                int sample_rate = 16000) {
  if (speech_dur <= 0.0) throw ContractError("synth_utterance: nonpositive duration");
  const double lead = rng.uniform(0.05, 0.15);
  const double tail = rng.uniform(0.05, 0.15);
  const double phase = rng.uniform(0.0, 2.0 * M_PI);
  const double peak = rng.uniform(0.3, 0.7);
  // Small per-utterance formant jitter keeps utterances of one voice distinct.
  const double jit = 1.0 + rng.uniform(-0.03, 0.03);

  const size_t n = static_cast<size_t>(std::lround((lead + speech_dur + tail) * sample_rate));
  std::vector<double> x(n);
  for (auto& s : x) s = rng.normal();
  for (size_t i = 1; i < n; ++i) x[i] = (1.0 - v.tilt) * x[i] + v.tilt * x[i - 1];
  resonate(x, v.f1 * jit, v.b1, sample_rate);
  resonate(x, v.f2 * jit, v.b2, sample_rate);
  resonate(x, v.f3 * jit, v.b3, sample_rate);

  double maxabs = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    double env = 0.0;
    if (t >= lead && t < lead + speech_dur) {
      const double am =
          v.am_floor + (1.0 - v.am_floor) * 0.5 * (1.0 + std::sin(2.0 * M_PI * v.am_rate * (t - lead) + phase));
      // 5 ms raised-cosine on/off ramps at the speech edges.
      const double edge = std::min(t - lead, lead + speech_dur - t);
      const double ramp = edge >= 0.005 ? 1.0 : 0.5 * (1.0 - std::cos(M_PI * edge / 0.005));
      env = am * ramp;
    }
    x[i] *= env;
    maxabs = std::max(maxabs, std::fabs(x[i]));
  }
  if (maxabs > 0.0)
    for (auto& s : x) s *= peak / maxabs;
  return Waveform{std::move(x), sample_rate};
}

// ---------------------------------------------------------------------------
// Toy corpus

struct ToyCorpus {
  std::vector<std::string> speakers;
  std::map<std::string, std::vector<Waveform>> utterances;

  size_t num_speakers() const { return speakers.size(); }
  size_t num_utterances() const {
    size_t n = 0;
    for (const auto& [_, u] : utterances) n += u.size();
    return n;
  }
};

struct CorpusParams {
  int num_speakers = 8;
  int utts_per_speaker = 10;
  double utt_dur_lo = 1.5, utt_dur_hi = 4.0;
  uint64_t seed = 1;
  VoiceDomain domain = VoiceDomain::simulated();
  std::string speaker_prefix = "spk";
  int sample_rate = 16000;
};

inline Waveform vad_trim(const Waveform& w) {
  const auto segs = energy_vad(w);
  if (segs.empty()) return w;
  const double pad = 0.01;
  const size_t a = static_cast<size_t>(std::max(0.0, segs.front().first - pad) * w.sample_rate);
  const size_t b = std::min(w.samples.size(),
                            static_cast<size_t>((segs.back().second + pad) * w.sample_rate));
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(w.samples.begin() + static_cast<long>(a), w.samples.begin() + static_cast<long>(b));
  return out;
}

// Synthesizes the corpus in memory.  Voices and utterances draw from seed
// streams derived per speaker and per utterance, so any subset is reproducible
// independently of generation order.
inline ToyCorpus synth_toy_corpus(const CorpusParams& p) {
  if (p.num_speakers < 1 || p.utts_per_speaker < 1)
    throw ConfigError("synth_toy_corpus: need at least one speaker and utterance");
  ToyCorpus corpus;
  char buf[64];
  for (int s = 0; s < p.num_speakers; ++s) {
    std::snprintf(buf, sizeof(buf), "%s%02d", p.speaker_prefix.c_str(), s);
    const std::string id(buf);
    corpus.speakers.push_back(id);
    Rng voice_rng(derive_seed(p.seed, "corpus.voice", static_cast<uint64_t>(s)));
    const VoiceParams voice = draw_voice(p.domain, voice_rng);
    auto& utts = corpus.utterances[id];
    for (int u = 0; u < p.utts_per_speaker; ++u) {
      Rng rng(derive_seed(p.seed, "corpus.utt",
                          static_cast<uint64_t>(s) * 10000 + static_cast<uint64_t>(u)));
      const double dur = rng.uniform(p.utt_dur_lo, p.utt_dur_hi);
      utts.push_back(vad_trim(synth_utterance(voice, dur, rng, p.sample_rate)));
    }
  }
  return corpus;
}

// Writes wavs plus a manifest of `<speaker_id> <wav_filename>` lines; paths in
// the manifest are relative to its directory.  Returns the manifest path.
inline std::string build_toy_corpus(const std::string& dir, const CorpusParams& p) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const ToyCorpus corpus = synth_toy_corpus(p);
  const fs::path root(dir);
  std::ofstream manifest(root / "manifest.txt");
  if (!manifest) throw FormatError("build_toy_corpus: cannot write manifest in " + dir);
  for (const auto& id : corpus.speakers) {
    const auto& utts = corpus.utterances.at(id);
    for (size_t u = 0; u < utts.size(); ++u) {
      const std::string name = id + "_utt" + std::to_string(u) + ".wav";
      write_wav((root / name).string(), utts[u]);
      manifest << id << " " << name << "\n";
    }
  }
  return (root / "manifest.txt").string();
}

inline ToyCorpus load_toy_corpus(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream in(manifest_path);
  if (!in) throw FormatError("load_toy_corpus: cannot open " + manifest_path);
  const fs::path root = fs::path(manifest_path).parent_path();
  ToyCorpus corpus;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id, rel;
    if (!(ls >> id >> rel))
      throw FormatError("load_toy_corpus: bad manifest line " + std::to_string(lineno));
    fs::path wav(rel);
    if (wav.is_relative()) wav = root / wav;
    if (corpus.utterances.find(id) == corpus.utterances.end()) corpus.speakers.push_back(id);
    corpus.utterances[id].push_back(read_wav(wav.string()));
  }
  if (corpus.speakers.empty()) throw FormatError("load_toy_corpus: empty manifest");
  return corpus;
}

// ---------------------------------------------------------------------------
// Mixture simulation

struct MixtureSample {
  Waveform wave;
  Annotation annotation;
  std::vector<std::string> speakers;  // canonical label order
};

// Mixes `num_speakers` randomly chosen voices into one recording.  Each
// speaker independently places whole utterances at uniform random onsets
// (gain uniform in +-3 dB) until their cumulative speech reaches a random
// target in [20%, 80%] of the duration, so the overlap ratio is whatever
// falls out of the placements.  The sum is peak-normalized to 0.95.
inline MixtureSample simulate_mixture(const ToyCorpus& corpus, Rng& rng, int num_speakers,
                                      double duration = 16.0) {
  if (corpus.speakers.empty()) throw ConfigError("simulate_mixture: empty corpus");
  if (num_speakers < 1 || static_cast<size_t>(num_speakers) > corpus.num_speakers())
    throw ConfigError("simulate_mixture: need 1.." + std::to_string(corpus.num_speakers()) +
                      " speakers, got " + std::to_string(num_speakers));
  const int sr = corpus.utterances.at(corpus.speakers[0])[0].sample_rate;
  const size_t n = static_cast<size_t>(std::lround(duration * sr));

  MixtureSample mix;
  mix.wave.sample_rate = sr;
  mix.wave.samples.assign(n, 0.0);

  const auto pick = rng.sample_without_replacement(static_cast<int>(corpus.num_speakers()),
                                                   num_speakers);
  for (const int si : pick) mix.speakers.push_back(corpus.speakers[static_cast<size_t>(si)]);

  for (const auto& spk : mix.speakers) {
    const auto& utts = corpus.utterances.at(spk);
    const double target = rng.uniform(0.2, 0.8) * duration;
    double placed = 0.0;
    while (placed < target) {
      const auto& utt = utts[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(utts.size()) - 1))];
      const double gain = std::pow(10.0, rng.uniform(-3.0, 3.0) / 20.0);
      const double utt_dur = std::min(utt.duration(), duration);
      const size_t utt_n = static_cast<size_t>(std::lround(utt_dur * sr));
      const size_t max_onset = n - utt_n;
      const size_t onset =
          max_onset == 0 ? 0 : static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(max_onset)));
      for (size_t i = 0; i < utt_n; ++i) mix.wave.samples[onset + i] += gain * utt.samples[i];
      const double t0 = static_cast<double>(onset) / sr;
      mix.annotation.segments.push_back({spk, t0, std::min(t0 + utt_dur, duration)});
      placed += utt_dur;
    }
  }
  double peak = 0.0;
  for (const double s : mix.wave.samples) peak = std::max(peak, std::fabs(s));
  if (peak > 0.0)
    for (auto& s : mix.wave.samples) s *= 0.95 / peak;
  mix.annotation.sort_by_onset();
  return mix;
}

// ---------------------------------------------------------------------------
// Labels

// label[i, t] = 1 iff speakers[i] has positive-measure speech inside the
// output frame [t*R, (t+1)*R).  Any overlap counts; touching boundaries do not.
inline TensorPtr labels_from_annotation(const Annotation& ann,
                                        const std::vector<std::string>& speakers, double r,
                                        double duration) {
  if (r <= 0.0) throw ConfigError("labels_from_annotation: resolution must be positive");
  const int64_t t_out = std::llround(duration / r);
  if (std::fabs(duration / r - static_cast<double>(t_out)) > 1e-9)
    throw ConfigError("labels_from_annotation: duration not a multiple of resolution");
  auto labels = Tensor::create({static_cast<int64_t>(speakers.size()), t_out});
  for (size_t i = 0; i < speakers.size(); ++i) {
    const Timeline tl = ann.speaker_timeline(speakers[i]);
    for (const auto& seg : tl.iv) {
      const int64_t lo = std::max<int64_t>(0, static_cast<int64_t>(std::floor(seg.a / r)));
      const int64_t hi = std::min(t_out - 1, static_cast<int64_t>(std::ceil(seg.b / r)) - 1);
      for (int64_t t = lo; t <= hi; ++t) {
        const double overlap = std::min(seg.b, (static_cast<double>(t) + 1.0) * r) -
                               std::max(seg.a, static_cast<double>(t) * r);
        if (overlap > 1e-12) labels->at(static_cast<int64_t>(i), t) = 1.0;
      }
    }
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Profile augmentation

using EmbeddingBank = std::map<std::string, std::vector<double>>;

struct AugmentedProfiles {
  TensorPtr profiles;           // [l_dec x s]
  std::vector<int> label_rows;  // slot -> canonical label row, or -1 for all-zero
  bool replaced_all = false;
};

// Builds the l_dec profile slots for one example.  Draw order is fixed:
// (1) replace-all Bernoulli(replace_all_prob), (2) one zero-vs-decoy
// Bernoulli(zero_prob) per pad slot, (3) decoys sampled without replacement
// from the bank minus present speakers, (4) Fisher-Yates shuffle of slots
// jointly with label rows.  With `enabled` false the true speakers sit in
// canonical order, pads are zero, and no rng draws happen.
inline AugmentedProfiles augment_profiles(const std::vector<std::string>& true_speakers,
                                          const EmbeddingBank& bank, int64_t l_dec, Rng& rng,
                                          bool enabled = true, double zero_prob = 0.5,
                                          double replace_all_prob = 0.2) {
  if (bank.empty()) throw ConfigError("augment_profiles: empty embedding bank");
  const int64_t n = static_cast<int64_t>(true_speakers.size());
  if (n > l_dec) throw ContractError("augment_profiles: more speakers than decoder slots");
  const int64_t s = static_cast<int64_t>(bank.begin()->second.size());
  for (const auto& [id, emb] : bank)
    if (static_cast<int64_t>(emb.size()) != s)
      throw ContractError("augment_profiles: inconsistent embedding dim for " + id);
  for (const auto& id : true_speakers)
    if (bank.find(id) == bank.end())
      throw ConfigError("augment_profiles: bank lacks speaker " + id);

  AugmentedProfiles out;
  out.profiles = Tensor::create({l_dec, s});
  out.label_rows.assign(static_cast<size_t>(l_dec), -1);

  // Canonical slot plan: entry >= 0 is a true-speaker row, -2 a decoy, -1 zero.
  std::vector<int> plan(static_cast<size_t>(l_dec), -1);
  int decoys_needed = 0;
  if (enabled) {
    out.replaced_all = rng.uniform() < replace_all_prob;
    for (int64_t i = 0; i < n; ++i) {
      if (out.replaced_all) {
        plan[static_cast<size_t>(i)] = -2;
        ++decoys_needed;
      } else {
        plan[static_cast<size_t>(i)] = static_cast<int>(i);
      }
    }
    for (int64_t i = n; i < l_dec; ++i) {
      if (rng.uniform() < zero_prob) {
        plan[static_cast<size_t>(i)] = -1;
      } else {
        plan[static_cast<size_t>(i)] = -2;
        ++decoys_needed;
      }
    }
  } else {
    for (int64_t i = 0; i < n; ++i) plan[static_cast<size_t>(i)] = static_cast<int>(i);
  }

  std::vector<const std::vector<double>*> decoys;
  if (decoys_needed > 0) {
    std::vector<std::string> candidates;
    for (const auto& [id, _] : bank)
      if (std::find(true_speakers.begin(), true_speakers.end(), id) == true_speakers.end())
        candidates.push_back(id);
    if (static_cast<int>(candidates.size()) < decoys_needed)
      throw ConfigError("augment_profiles: bank has " + std::to_string(candidates.size()) +
                        " absent speakers, need " + std::to_string(decoys_needed));
    const auto idx = rng.sample_without_replacement(static_cast<int>(candidates.size()),
                                                    decoys_needed);
    for (const int i : idx) decoys.push_back(&bank.at(candidates[static_cast<size_t>(i)]));
  }

  std::vector<int64_t> order(static_cast<size_t>(l_dec));
  for (int64_t i = 0; i < l_dec; ++i) order[static_cast<size_t>(i)] = i;
  if (enabled) rng.shuffle(order);

  size_t next_decoy = 0;
  for (int64_t slot = 0; slot < l_dec; ++slot) {
    const int what = plan[static_cast<size_t>(order[static_cast<size_t>(slot)])];
    const std::vector<double>* emb = nullptr;
    if (what >= 0) {
      emb = &bank.at(true_speakers[static_cast<size_t>(what)]);
      out.label_rows[static_cast<size_t>(slot)] = what;
    } else if (what == -2) {
      emb = decoys[next_decoy++];
    }
    if (emb != nullptr)
      for (int64_t j = 0; j < s; ++j) out.profiles->at(slot, j) = (*emb)[static_cast<size_t>(j)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Waveform augmentation

// Adds white or babble noise at the given SNR (dB) relative to signal power.
inline void add_noise(Waveform& wave, const ToyCorpus& corpus, Rng& rng, double snr_db) {
  const size_t n = wave.samples.size();
  std::vector<double> noise(n, 0.0);
  if (rng.uniform() < 0.5) {
    for (auto& v : noise) v = rng.normal();
  } else {
    // Babble: several corpus utterances at random onsets, truncated at the end.
    const int k = 8;
    for (int i = 0; i < k; ++i) {
      const auto& spk = corpus.speakers[static_cast<size_t>(
          rng.uniform_int(0, static_cast<int64_t>(corpus.num_speakers()) - 1))];
      const auto& utts = corpus.utterances.at(spk);
      const auto& utt = utts[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(utts.size()) - 1))];
      const size_t onset = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(n) - 1));
      for (size_t j = 0; j < utt.samples.size() && onset + j < n; ++j)
        noise[onset + j] += utt.samples[j];
    }
  }
  double p_sig = 0.0, p_noise = 0.0;
  for (const double v : wave.samples) p_sig += v * v;
  for (const double v : noise) p_noise += v * v;
  if (p_noise <= 0.0 || p_sig <= 0.0) return;
  const double g = std::sqrt(p_sig / (p_noise * std::pow(10.0, snr_db / 10.0)));
  for (size_t i = 0; i < n; ++i) wave.samples[i] += g * noise[i];
  double peak = 0.0;
  for (const double v : wave.samples) peak = std::max(peak, std::fabs(v));
  if (peak > 0.0)
    for (auto& v : wave.samples) v *= 0.95 / peak;
}

// Convolves with a noise-excited exponentially decaying impulse response
// (direct path at tap 0), truncating back to the original length.
inline void apply_reverb(Waveform& wave, Rng& rng, double ir_seconds = 0.2) {
  const size_t taps = static_cast<size_t>(ir_seconds * wave.sample_rate);
  std::vector<double> ir(taps);
  ir[0] = 1.0;
  for (size_t k = 1; k < taps; ++k)
    ir[k] = 0.3 * rng.normal() * std::exp(-6.0 * static_cast<double>(k) / static_cast<double>(taps));
  auto wet = fft_convolve(wave.samples, ir);
  wet.resize(wave.samples.size());
  double peak = 0.0;
  for (const double v : wet) peak = std::max(peak, std::fabs(v));
  if (peak > 0.0)
    for (auto& v : wet) v *= 0.95 / peak;
  wave.samples = std::move(wet);
}

// ---------------------------------------------------------------------------
// Training examples

struct ExampleConfig {
  double duration = 16.0;
  double resolution = 0.08;
  int64_t l_dec = 4;
  int min_speakers = 1;
  int max_speakers = 4;
  double noise_prob = 0.0;
  double reverb_prob = 0.0;
  double snr_lo = 5.0, snr_hi = 20.0;
  bool augment_profiles_enabled = true;
  FbankConfig fbank{};
};

struct TrainingExample {
  TensorPtr features;  // [t x n_mels]
  TensorPtr profiles;  // [l_dec x s]
  TensorPtr labels;    // [l_dec x t_out]
  std::vector<int> label_rows;
  MixtureSample mix;
};

// Fixed draw order: speaker count, mixture, noise gate (+ its params), reverb
// gate (+ its params), profile augmentation.
inline TrainingExample make_training_example(const ToyCorpus& corpus, const EmbeddingBank& bank,
                                             const ExampleConfig& cfg, Rng& rng) {
  if (cfg.min_speakers < 1 || cfg.max_speakers < cfg.min_speakers)
    throw ConfigError("make_training_example: bad speaker range");
  const int max_k = std::min<int>(cfg.max_speakers,
                                  std::min<int64_t>(static_cast<int64_t>(corpus.num_speakers()), cfg.l_dec));
  if (max_k < cfg.min_speakers)
    throw ConfigError("make_training_example: speaker range incompatible with corpus/slots");
  const int k = static_cast<int>(rng.uniform_int(cfg.min_speakers, max_k));

  TrainingExample ex;
  ex.mix = simulate_mixture(corpus, rng, k, cfg.duration);
  if (cfg.noise_prob > 0.0 && rng.uniform() < cfg.noise_prob)
    add_noise(ex.mix.wave, corpus, rng, rng.uniform(cfg.snr_lo, cfg.snr_hi));
  if (cfg.reverb_prob > 0.0 && rng.uniform() < cfg.reverb_prob) apply_reverb(ex.mix.wave, rng);

  ex.features = fbank(ex.mix.wave, cfg.fbank);
  const auto canonical = labels_from_annotation(ex.mix.annotation, ex.mix.speakers,
                                                cfg.resolution, cfg.duration);
  auto aug = augment_profiles(ex.mix.speakers, bank, cfg.l_dec, rng,
                              cfg.augment_profiles_enabled);
  ex.profiles = aug.profiles;
  ex.label_rows = aug.label_rows;
  const int64_t t_out = canonical->dim(1);
  ex.labels = Tensor::create({cfg.l_dec, t_out});
  for (int64_t slot = 0; slot < cfg.l_dec; ++slot) {
    const int row = ex.label_rows[static_cast<size_t>(slot)];
    if (row < 0) continue;
    for (int64_t t = 0; t < t_out; ++t)
      ex.labels->at(slot, t) = canonical->at(row, t);
  }
  return ex;
}

}  // namespace seqdiar
