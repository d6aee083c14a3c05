// config.hpp
//
// Flat key=value run configuration covering every model, training, and
// inference knob, with file loading, command-line overrides, a full-default
// dump, and a stable FNV-1a hash for run manifests.
//
// The schema is the single source of truth: every key listed there is
// dumped with its current value, unknown keys are rejected, and values
// print in the shortest form that parses back to the identical double, so
// dump -> load -> dump is a fixed point and the hash is reproducible.
//
// A few fields are derived rather than exposed, because disagreement would
// only produce shape errors downstream: the filterbank geometry is shared
// by training, pretraining, and inference (fbank.*); model.frame_shift
// mirrors fbank.frame_shift; and training examples inherit the model's
// chunk length, output resolution, and decoder capacity.

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

#ifndef SEQDIAR_CONFIG_HPP_
#define SEQDIAR_CONFIG_HPP_

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "seqdiar/inference.hpp"
#include "seqdiar/trainer.hpp"

namespace seqdiar {

inline constexpr const char* kSeqdiarVersion = "0.1.0";

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  PretrainConfig pretrain;
  InferenceConfig infer;
  CorpusParams corpus;
  FbankConfig fbank;

  // Propagates the shared and derived fields listed in the header comment.
  void sync() {
    model.frame_shift = fbank.frame_shift;
    train.example.fbank = fbank;
    train.example.duration = model.chunk_seconds;
    train.example.resolution = model.output_resolution;
    train.example.l_dec = model.decoder.num_slots;
    pretrain.fbank = fbank;
    infer.fbank = fbank;
  }
};

// ---------------------------------------------------------------------------
// Value formatting and parsing

// Shortest decimal that parses back to exactly the same double.
inline std::string format_double(double v) {
  char buf[48];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0')
    throw ConfigError("config: " + key + ": not a number: '" + value + "'");
  return v;
}

inline long long parse_ll(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0')
    throw ConfigError("config: " + key + ": not an integer: '" + value + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config: " + key + ": expected true/false: '" + value + "'");
}

// ---------------------------------------------------------------------------
// Schema

struct ConfigEntry {
  std::string key;
  std::function<std::string(RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

inline const std::vector<ConfigEntry>& config_schema() {
  static const std::vector<ConfigEntry> schema = [] {
    std::vector<ConfigEntry> s;
    auto num = [&s](const std::string& key, auto accessor) {
      using T = std::remove_reference_t<decltype(accessor(std::declval<RunConfig&>()))>;
      if constexpr (std::is_same_v<T, double>) {
        s.push_back({key, [accessor](RunConfig& c) { return format_double(accessor(c)); },
                     [accessor, key](RunConfig& c, const std::string& v) {
                       accessor(c) = parse_double(key, v);
                     }});
      } else if constexpr (std::is_same_v<T, bool>) {
        s.push_back({key,
                     [accessor](RunConfig& c) { return accessor(c) ? std::string("true") : std::string("false"); },
                     [accessor, key](RunConfig& c, const std::string& v) {
                       accessor(c) = parse_bool(key, v);
                     }});
      } else {
        s.push_back({key, [accessor](RunConfig& c) { return std::to_string(accessor(c)); },
                     [accessor, key](RunConfig& c, const std::string& v) {
                       accessor(c) = static_cast<T>(parse_ll(key, v));
                     }});
      }
    };
    auto str = [&s](const std::string& key, auto accessor) {
      s.push_back({key, [accessor](RunConfig& c) { return accessor(c); },
                   [accessor](RunConfig& c, const std::string& v) { accessor(c) = v; }});
    };
    auto int4 = [&s](const std::string& key, auto accessor) {
      s.push_back({key,
                   [accessor](RunConfig& c) {
                     const auto& a = accessor(c);
                     std::string out;
                     for (size_t i = 0; i < a.size(); ++i)
                       out += (i ? "," : "") + std::to_string(a[i]);
                     return out;
                   },
                   [accessor, key](RunConfig& c, const std::string& v) {
                     auto& a = accessor(c);
                     std::stringstream ss(v);
                     std::string field;
                     size_t i = 0;
                     while (std::getline(ss, field, ',')) {
                       if (i >= a.size())
                         throw ConfigError("config: " + key + ": expected 4 values: '" + v + "'");
                       a[i++] = static_cast<int>(parse_ll(key, field));
                     }
                     if (i != a.size())
                       throw ConfigError("config: " + key + ": expected 4 values: '" + v + "'");
                   }});
    };

    int4("model.frontend.widths", [](RunConfig& c) -> auto& { return c.model.frontend.widths; });
    int4("model.frontend.blocks", [](RunConfig& c) -> auto& { return c.model.frontend.blocks; });
    num("model.frontend.embed_dim", [](RunConfig& c) -> auto& { return c.model.frontend.embed_dim; });
    num("model.encoder.dim", [](RunConfig& c) -> auto& { return c.model.encoder.dim; });
    num("model.encoder.num_blocks", [](RunConfig& c) -> auto& { return c.model.encoder.num_blocks; });
    num("model.encoder.heads", [](RunConfig& c) -> auto& { return c.model.encoder.heads; });
    num("model.encoder.ffn_dim", [](RunConfig& c) -> auto& { return c.model.encoder.ffn_dim; });
    num("model.encoder.dropout", [](RunConfig& c) -> auto& { return c.model.encoder.dropout; });
    num("model.encoder.conv_kernel", [](RunConfig& c) -> auto& { return c.model.encoder.conv_kernel; });
    num("model.decoder.dim", [](RunConfig& c) -> auto& { return c.model.decoder.dim; });
    num("model.decoder.num_blocks", [](RunConfig& c) -> auto& { return c.model.decoder.num_blocks; });
    num("model.decoder.heads", [](RunConfig& c) -> auto& { return c.model.decoder.heads; });
    num("model.decoder.ffn_dim", [](RunConfig& c) -> auto& { return c.model.decoder.ffn_dim; });
    num("model.decoder.dropout", [](RunConfig& c) -> auto& { return c.model.decoder.dropout; });
    num("model.decoder.embed_dim", [](RunConfig& c) -> auto& { return c.model.decoder.embed_dim; });
    num("model.decoder.num_slots", [](RunConfig& c) -> auto& { return c.model.decoder.num_slots; });
    num("model.chunk_seconds", [](RunConfig& c) -> auto& { return c.model.chunk_seconds; });
    num("model.output_resolution", [](RunConfig& c) -> auto& { return c.model.output_resolution; });

    s.push_back({"train.stage",
                 [](RunConfig& c) { return std::string(1, c.train.stage); },
                 [](RunConfig& c, const std::string& v) {
                   if (v.size() != 1)
                     throw ConfigError("config: train.stage: expected one letter: '" + v + "'");
                   c.train.stage = v[0];
                 }});
    num("train.lr", [](RunConfig& c) -> auto& { return c.train.lr; });
    num("train.warmup_steps", [](RunConfig& c) -> auto& { return c.train.warmup_steps; });
    num("train.real_data_ratio", [](RunConfig& c) -> auto& { return c.train.real_data_ratio; });
    num("train.max_steps", [](RunConfig& c) -> auto& { return c.train.max_steps; });
    num("train.batch_size", [](RunConfig& c) -> auto& { return c.train.batch_size; });
    num("train.seed", [](RunConfig& c) -> auto& { return c.train.seed; });
    num("train.clip_norm", [](RunConfig& c) -> auto& { return c.train.clip_norm; });
    num("train.checkpoint_every", [](RunConfig& c) -> auto& { return c.train.checkpoint_every; });
    num("train.eval_every", [](RunConfig& c) -> auto& { return c.train.eval_every; });
    num("train.eval_examples", [](RunConfig& c) -> auto& { return c.train.eval_examples; });
    num("train.patience", [](RunConfig& c) -> auto& { return c.train.patience; });
    num("train.min_improvement", [](RunConfig& c) -> auto& { return c.train.min_improvement; });
    num("train.example.min_speakers", [](RunConfig& c) -> auto& { return c.train.example.min_speakers; });
    num("train.example.max_speakers", [](RunConfig& c) -> auto& { return c.train.example.max_speakers; });
    num("train.example.noise_prob", [](RunConfig& c) -> auto& { return c.train.example.noise_prob; });
    num("train.example.reverb_prob", [](RunConfig& c) -> auto& { return c.train.example.reverb_prob; });
    num("train.example.snr_lo", [](RunConfig& c) -> auto& { return c.train.example.snr_lo; });
    num("train.example.snr_hi", [](RunConfig& c) -> auto& { return c.train.example.snr_hi; });
    num("train.example.augment_profiles", [](RunConfig& c) -> auto& { return c.train.example.augment_profiles_enabled; });

    num("pretrain.steps", [](RunConfig& c) -> auto& { return c.pretrain.steps; });
    num("pretrain.batch_size", [](RunConfig& c) -> auto& { return c.pretrain.batch_size; });
    num("pretrain.lr", [](RunConfig& c) -> auto& { return c.pretrain.lr; });
    num("pretrain.warmup_steps", [](RunConfig& c) -> auto& { return c.pretrain.warmup_steps; });
    num("pretrain.clip_norm", [](RunConfig& c) -> auto& { return c.pretrain.clip_norm; });
    num("pretrain.crop_seconds", [](RunConfig& c) -> auto& { return c.pretrain.crop_seconds; });
    num("pretrain.seed", [](RunConfig& c) -> auto& { return c.pretrain.seed; });

    num("infer.window", [](RunConfig& c) -> auto& { return c.infer.window; });
    num("infer.window_shift", [](RunConfig& c) -> auto& { return c.infer.window_shift; });
    num("infer.min_window", [](RunConfig& c) -> auto& { return c.infer.min_window; });
    num("infer.ahc_threshold", [](RunConfig& c) -> auto& { return c.infer.ahc_threshold; });
    num("infer.min_solo", [](RunConfig& c) -> auto& { return c.infer.min_solo; });
    num("infer.l_dec", [](RunConfig& c) -> auto& { return c.infer.l_dec; });
    num("infer.binarize_threshold", [](RunConfig& c) -> auto& { return c.infer.binarize_threshold; });
    num("infer.merge_gap", [](RunConfig& c) -> auto& { return c.infer.merge_gap; });
    num("infer.min_segment", [](RunConfig& c) -> auto& { return c.infer.min_segment; });

    num("vad.frame_length", [](RunConfig& c) -> auto& { return c.infer.vad.frame_length; });
    num("vad.frame_shift", [](RunConfig& c) -> auto& { return c.infer.vad.frame_shift; });
    num("vad.threshold_db", [](RunConfig& c) -> auto& { return c.infer.vad.threshold_db; });
    num("vad.floor_percentile", [](RunConfig& c) -> auto& { return c.infer.vad.floor_percentile; });
    num("vad.merge_gap", [](RunConfig& c) -> auto& { return c.infer.vad.merge_gap; });
    num("vad.min_duration", [](RunConfig& c) -> auto& { return c.infer.vad.min_duration; });

    num("fbank.sample_rate", [](RunConfig& c) -> auto& { return c.fbank.sample_rate; });
    num("fbank.num_mels", [](RunConfig& c) -> auto& { return c.fbank.num_mels; });
    num("fbank.frame_length", [](RunConfig& c) -> auto& { return c.fbank.frame_length; });
    num("fbank.frame_shift", [](RunConfig& c) -> auto& { return c.fbank.frame_shift; });
    num("fbank.preemphasis", [](RunConfig& c) -> auto& { return c.fbank.preemphasis; });
    num("fbank.low_freq", [](RunConfig& c) -> auto& { return c.fbank.low_freq; });
    num("fbank.nfft", [](RunConfig& c) -> auto& { return c.fbank.nfft; });
    num("fbank.mean_normalize", [](RunConfig& c) -> auto& { return c.fbank.mean_normalize; });

    num("corpus.num_speakers", [](RunConfig& c) -> auto& { return c.corpus.num_speakers; });
    num("corpus.utts_per_speaker", [](RunConfig& c) -> auto& { return c.corpus.utts_per_speaker; });
    num("corpus.utt_dur_lo", [](RunConfig& c) -> auto& { return c.corpus.utt_dur_lo; });
    num("corpus.utt_dur_hi", [](RunConfig& c) -> auto& { return c.corpus.utt_dur_hi; });
    num("corpus.seed", [](RunConfig& c) -> auto& { return c.corpus.seed; });
    str("corpus.speaker_prefix", [](RunConfig& c) -> auto& { return c.corpus.speaker_prefix; });
    num("corpus.sample_rate", [](RunConfig& c) -> auto& { return c.corpus.sample_rate; });
    s.push_back({"corpus.domain",
                 [](RunConfig& c) {
                   return c.corpus.domain.name;
                 },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "simulated")
                     c.corpus.domain = VoiceDomain::simulated();
                   else if (v == "held_out")
                     c.corpus.domain = VoiceDomain::held_out();
                   else
                     throw ConfigError("config: corpus.domain: expected simulated or held_out: '" +
                                       v + "'");
                 }});
    return s;
  }();
  return schema;
}

inline void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& e : config_schema()) {
    if (e.key == key) {
      e.set(cfg, value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

// Every key in schema order, one `key=value` line each.
inline std::string dump_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::string out;
  for (const auto& e : config_schema()) out += e.key + "=" + e.get(copy) + "\n";
  return out;
}

// Applies `key=value` lines; '#' starts a comment, blank lines are skipped.
inline void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::stringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: " + origin + ":" + std::to_string(lineno) +
                        ": expected key=value, got '" + line + "'");
    set_config_key(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
}

inline RunConfig load_config_file(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(base, ss.str(), path);
  return base;
}

// `key=value` strings from the command line, applied after any file.
inline void apply_overrides(RunConfig& cfg, const std::vector<std::string>& kvs) {
  for (const auto& kv : kvs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: override must be key=value, got '" + kv + "'");
    set_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
}

// ---------------------------------------------------------------------------
// Hashing

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string config_hash_hex(const RunConfig& cfg) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(dump_config(cfg))));
  return buf;
}

}  // namespace seqdiar

#endif  // SEQDIAR_CONFIG_HPP_
