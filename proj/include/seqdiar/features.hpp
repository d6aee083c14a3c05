// seqdiar/features.hpp
//
// Log-mel filterbank features and a simple energy voice activity detector.

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
#include <cstdint>
#include <utility>
#include <vector>

#include "seqdiar/fft.hpp"
#include "seqdiar/tensor.hpp"
#include "seqdiar/wav.hpp"

namespace seqdiar {

struct FbankConfig {
  int sample_rate = 16000;
  int num_mels = 80;
  double frame_length = 0.025;  // seconds
  double frame_shift = 0.010;
  double preemphasis = 0.97;
  double low_freq = 20.0;
  size_t nfft = 512;
  bool mean_normalize = true;

  int frame_samples() const { return static_cast<int>(std::lround(frame_length * sample_rate)); }
  int shift_samples() const { return static_cast<int>(std::lround(frame_shift * sample_rate)); }
};

// Frames that fit entirely inside the signal: 0 when shorter than a window,
// else 1 + floor((n - window) / shift).
inline int64_t num_frames(int64_t num_samples, const FbankConfig& cfg = {}) {
  const int64_t win = cfg.frame_samples(), shift = cfg.shift_samples();
  if (num_samples < win) return 0;
  return 1 + (num_samples - win) / shift;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular mel filters as weights over FFT bins 0..nfft/2.
inline std::vector<std::vector<double>> mel_filterbank(const FbankConfig& cfg) {
  const double nyquist = cfg.sample_rate / 2.0;
  const double mel_lo = hz_to_mel(cfg.low_freq), mel_hi = hz_to_mel(nyquist);
  const int m = cfg.num_mels;
  std::vector<double> centers(static_cast<size_t>(m) + 2);
  for (int i = 0; i < m + 2; ++i)
    centers[static_cast<size_t>(i)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (m + 1));
  const size_t bins = cfg.nfft / 2 + 1;
  const double bin_hz = static_cast<double>(cfg.sample_rate) / static_cast<double>(cfg.nfft);
  std::vector<std::vector<double>> filters(static_cast<size_t>(m), std::vector<double>(bins, 0.0));
  for (int f = 0; f < m; ++f) {
    const double lo = centers[static_cast<size_t>(f)];
    const double mid = centers[static_cast<size_t>(f) + 1];
    const double hi = centers[static_cast<size_t>(f) + 2];
    for (size_t b = 0; b < bins; ++b) {
      const double hz = bin_hz * static_cast<double>(b);
      if (hz <= lo || hz >= hi) continue;
      filters[static_cast<size_t>(f)][b] = hz <= mid ? (hz - lo) / (mid - lo) : (hi - hz) / (hi - mid);
    }
  }
  return filters;
}

// Center frequency of each mel channel in Hz (for tests and inspection).
inline std::vector<double> mel_centers_hz(const FbankConfig& cfg) {
  const double mel_lo = hz_to_mel(cfg.low_freq), mel_hi = hz_to_mel(cfg.sample_rate / 2.0);
  std::vector<double> c(static_cast<size_t>(cfg.num_mels));
  for (int i = 0; i < cfg.num_mels; ++i)
    c[static_cast<size_t>(i)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i + 1) / (cfg.num_mels + 1));
  return c;
}

// Log-mel filterbank features, [T x num_mels].  Never produces NaN: power is
// floored at 1e-10 before the log.  With mean_normalize, per-recording
// channel means are subtracted.
inline TensorPtr fbank(const Waveform& w, const FbankConfig& cfg = {}) {
  if (w.sample_rate != cfg.sample_rate) throw ConfigError("fbank: sample rate mismatch");
  const int win = cfg.frame_samples(), shift = cfg.shift_samples();
  const int64_t t_len = num_frames(static_cast<int64_t>(w.samples.size()), cfg);
  auto out = Tensor::create({t_len, cfg.num_mels});
  if (t_len == 0) return out;

  static thread_local std::vector<std::vector<double>> filters;
  static thread_local FbankConfig cached_cfg;
  if (filters.empty() || cached_cfg.sample_rate != cfg.sample_rate ||
      cached_cfg.num_mels != cfg.num_mels || cached_cfg.nfft != cfg.nfft ||
      cached_cfg.low_freq != cfg.low_freq) {
    filters = mel_filterbank(cfg);
    cached_cfg = cfg;
  }
  std::vector<double> window(static_cast<size_t>(win));
  for (int i = 0; i < win; ++i)
    window[static_cast<size_t>(i)] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (win - 1));

  std::vector<double> frame(static_cast<size_t>(win));
  for (int64_t t = 0; t < t_len; ++t) {
    const int64_t off = t * shift;
    for (int i = 0; i < win; ++i) {
      const int64_t j = off + i;
      const double cur = w.samples[static_cast<size_t>(j)];
      const double prev = j > 0 ? w.samples[static_cast<size_t>(j - 1)] : 0.0;
      frame[static_cast<size_t>(i)] = (cur - cfg.preemphasis * prev) * window[static_cast<size_t>(i)];
    }
    const auto power = power_spectrum(frame, cfg.nfft);
    for (int f = 0; f < cfg.num_mels; ++f) {
      const auto& flt = filters[static_cast<size_t>(f)];
      double e = 0.0;
      for (size_t b = 0; b < power.size(); ++b) e += flt[b] * power[b];
      out->at(t, f) = std::log(std::max(e, 1e-10));
    }
  }
  if (cfg.mean_normalize) {
    for (int f = 0; f < cfg.num_mels; ++f) {
      double s = 0.0;
      for (int64_t t = 0; t < t_len; ++t) s += out->at(t, f);
      const double mean = s / static_cast<double>(t_len);
      for (int64_t t = 0; t < t_len; ++t) out->at(t, f) -= mean;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Energy VAD
// ---------------------------------------------------------------------------

struct VadConfig {
  double frame_length = 0.030;
  double frame_shift = 0.010;
  double threshold_db = 12.0;   // above the 5th-percentile floor
  double floor_percentile = 0.05;
  double merge_gap = 0.3;       // seconds
  double min_duration = 0.2;    // seconds
};

// Active-speech segments as [onset, offset) pairs in seconds.
inline std::vector<std::pair<double, double>> energy_vad(const Waveform& w,
                                                         const VadConfig& cfg = {}) {
  const int win = static_cast<int>(std::lround(cfg.frame_length * w.sample_rate));
  const int shift = static_cast<int>(std::lround(cfg.frame_shift * w.sample_rate));
  const int64_t n = static_cast<int64_t>(w.samples.size());
  if (n < win) return {};
  const int64_t t_len = 1 + (n - win) / shift;
  std::vector<double> level_db(static_cast<size_t>(t_len));
  for (int64_t t = 0; t < t_len; ++t) {
    double s = 0.0;
    const double* p = w.samples.data() + t * shift;
    for (int i = 0; i < win; ++i) s += p[i] * p[i];
    const double rms = std::sqrt(s / win);
    level_db[static_cast<size_t>(t)] = 20.0 * std::log10(rms + 1e-12);
  }
  std::vector<double> sorted = level_db;
  std::sort(sorted.begin(), sorted.end());
  const size_t fi = static_cast<size_t>(cfg.floor_percentile * static_cast<double>(t_len - 1));
  const double threshold = sorted[fi] + cfg.threshold_db;

  // Active runs in frame index space, then to seconds.
  std::vector<std::pair<double, double>> segs;
  int64_t run_start = -1;
  for (int64_t t = 0; t <= t_len; ++t) {
    const bool active = t < t_len && level_db[static_cast<size_t>(t)] > threshold;
    if (active && run_start < 0) run_start = t;
    if (!active && run_start >= 0) {
      const double onset = static_cast<double>(run_start) * cfg.frame_shift;
      const double offset = static_cast<double>(t - 1) * cfg.frame_shift + cfg.frame_length;
      segs.emplace_back(onset, offset);
      run_start = -1;
    }
  }
  // Merge pauses shorter than merge_gap.
  std::vector<std::pair<double, double>> merged;
  for (const auto& s : segs) {
    if (!merged.empty() && s.first - merged.back().second < cfg.merge_gap)
      merged.back().second = std::max(merged.back().second, s.second);
    else
      merged.push_back(s);
  }
  // Drop fragments shorter than min_duration.
  std::vector<std::pair<double, double>> kept;
  for (const auto& s : merged)
    if (s.second - s.first >= cfg.min_duration) kept.push_back(s);
  return kept;
}

}  // namespace seqdiar
