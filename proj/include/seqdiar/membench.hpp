// membench.hpp
//
// Memory-complexity benchmark.  An encoder-only target-speaker baseline must
// materialize one input row per (frame, speaker) pair, so its input memory
// grows as T*N*(S+F); the sequence-to-sequence layout keeps frames [T x F]
// and profiles [N x S] apart, growing as T*F + N*S.  This module states both
// counts analytically and verifies them by running instrumented forward
// passes of (a) an encoder-only mock over the repeated-and-concatenated
// batch and (b) a single-block seq2seq model, recording peak live tensor
// elements via the allocator hook in ElementCounter.
//
// "Memory" here is the live float64 element count, not OS RSS: it is
// deterministic, portable, and compares the two layouts on equal terms.
// Model parameters are constructed outside the measured scope; the scope
// covers inputs and activations of the encoder-decoder modules only.

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

#ifndef SEQDIAR_MEMBENCH_HPP_
#define SEQDIAR_MEMBENCH_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <new>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "seqdiar/conformer.hpp"
#include "seqdiar/decoder.hpp"

namespace seqdiar {

// ---------------------------------------------------------------------------
// Analytic footprints

inline int64_t analytic_encoder_only(int64_t t_len, int64_t n_spk, int64_t s_dim, int64_t f_dim) {
  if (t_len < 1 || n_spk < 1 || s_dim < 1 || f_dim < 1)
    throw ContractError("analytic_encoder_only: dimensions must be positive");
  return t_len * n_spk * (s_dim + f_dim);
}

inline int64_t analytic_seq2seq(int64_t t_len, int64_t n_spk, int64_t s_dim, int64_t f_dim) {
  if (t_len < 1 || n_spk < 1 || s_dim < 1 || f_dim < 1)
    throw ContractError("analytic_seq2seq: dimensions must be positive");
  return t_len * f_dim + n_spk * s_dim;
}

// (encoder_only, seq2seq) input element counts.
inline std::pair<int64_t, int64_t> analytic_footprint(int64_t t_len, int64_t n_spk,
                                                      int64_t s_dim, int64_t f_dim) {
  return {analytic_encoder_only(t_len, n_spk, s_dim, f_dim),
          analytic_seq2seq(t_len, n_spk, s_dim, f_dim)};
}

// ---------------------------------------------------------------------------
// Benchmark models

// S and F stay at their reference width of 256 so the input terms dominate;
// the model width D is a desk-scale stand-in (it multiplies activation
// memory on both sides equally and does not change either scaling law).
struct BenchConfig {
  int64_t s_dim = 256;  // profile embedding width
  int64_t f_dim = 256;  // frame feature width
  int64_t dim = 64;     // model width D
  int heads = 4;
  int64_t ffn_dim = 128;
  int64_t conv_kernel = 7;
  uint64_t seed = 1;

  EncoderConfig encoder_config() const {
    EncoderConfig ec;
    ec.dim = dim;
    ec.num_blocks = 1;
    ec.heads = heads;
    ec.ffn_dim = ffn_dim;
    ec.dropout = 0.0;
    ec.conv_kernel = conv_kernel;
    return ec;
  }
};

// Encoder-only baseline: every speaker's profile is concatenated onto every
// frame, giving one [T*N x (S+F)] batch, and a single shared Conformer block
// processes the batch.  Row-wise sublayers run over all T*N rows at once;
// attention and convolution see one speaker's T rows at a time (speakers are
// independent sequences), but their outputs are materialized batched, so
// activation liveness scales with T*N exactly like the input.  Forward-only:
// the raw row copies below bypass the tape.
class EncoderOnlyMock {
 public:
  BenchConfig cfg;
  LinearLayer proj;   // (S+F) -> D
  ConformerBlock block;
  LinearLayer head;   // D -> 1 activity logit per (frame, speaker) row

  explicit EncoderOnlyMock(const BenchConfig& c, Rng& rng)
      : cfg(c),
        proj(c.s_dim + c.f_dim, c.dim, rng),
        block(c.encoder_config(), rng),
        head(c.dim, 1, rng) {}

  // feats: [T x F], profiles: [N x S] -> [T*N x 1] activity probabilities.
  TensorPtr forward(const TensorPtr& feats, const TensorPtr& profiles,
                    const RunContext& ctx) const {
    const int64_t t_len = feats->dim(0), n_spk = profiles->dim(0);
    const int64_t f_dim = feats->dim(1), s_dim = profiles->dim(1);

    // Repeat-and-concatenate: row n*T + t is [feats[t] | profiles[n]].
    auto big = Tensor::create({t_len * n_spk, f_dim + s_dim});
    for (int64_t n = 0; n < n_spk; ++n)
      for (int64_t t = 0; t < t_len; ++t) {
        double* row = big->data.data() + static_cast<size_t>((n * t_len + t) * (f_dim + s_dim));
        std::copy_n(feats->data.data() + static_cast<size_t>(t * f_dim),
                    static_cast<size_t>(f_dim), row);
        std::copy_n(profiles->data.data() + static_cast<size_t>(n * s_dim),
                    static_cast<size_t>(s_dim), row + f_dim);
      }

    auto x = add(proj.forward(big), tile_rows(sinusoidal_positions(t_len, cfg.dim), n_spk));
    x = add(x, scale(block.ff1.forward(x, ctx), 0.5));
    x = add(x, per_sequence(block.att, x, t_len, n_spk, ctx));
    x = add(x, per_sequence(block.conv, x, t_len, n_spk, ctx));
    x = add(x, scale(block.ff2.forward(x, ctx), 0.5));
    x = block.final_ln.forward(x);
    return sigmoid(head.forward(x));
  }

 private:
  static TensorPtr tile_rows(const TensorPtr& x, int64_t times) {
    auto out = Tensor::create({x->dim(0) * times, x->dim(1)});
    for (int64_t i = 0; i < times; ++i)
      std::copy(x->data.begin(), x->data.end(),
                out->data.begin() + static_cast<int64_t>(x->data.size()) * i);
    return out;
  }

  // Applies `module` to each speaker's [T x D] rows, collecting the results
  // into one batched [T*N x D] tensor.
  template <typename Module>
  static TensorPtr per_sequence(const Module& module, const TensorPtr& x, int64_t t_len,
                                int64_t n_spk, const RunContext& ctx) {
    auto out = Tensor::create(x->shape);
    for (int64_t n = 0; n < n_spk; ++n) {
      const auto y = module.forward(slice_rows(x, n * t_len, (n + 1) * t_len), ctx);
      std::copy(y->data.begin(), y->data.end(),
                out->data.begin() + n * t_len * x->dim(1));
    }
    return out;
  }
};

// Single-block seq2seq model over the factorized layout: frames [T x F] and
// profiles [N x S] never meet before the decoder's cross-attention.  One
// output frame per input frame.
class BenchSeq2Seq {
 public:
  ConformerEncoder encoder;
  SpeakerwiseDecoder decoder;
  ActivityHead head;

  BenchSeq2Seq(int64_t t_out, const BenchConfig& c, Rng& rng)
      : encoder(c.f_dim, c.encoder_config(), rng),
        decoder(decoder_config(c), rng),
        head(c.dim, t_out, rng) {}

  // feats: [T x F], profiles: [N x S] -> [N x T] activity probabilities.
  TensorPtr forward(const TensorPtr& feats, const TensorPtr& profiles,
                    const RunContext& ctx) const {
    return head.forward(decoder.decode(profiles, encoder.encode(feats, ctx), ctx));
  }

 private:
  static DecoderConfig decoder_config(const BenchConfig& c) {
    DecoderConfig dc;
    dc.dim = c.dim;
    dc.num_blocks = 1;
    dc.heads = c.heads;
    dc.ffn_dim = c.ffn_dim;
    dc.dropout = 0.0;
    dc.embed_dim = c.s_dim;
    dc.num_slots = 1;  // decode() accepts any N; capacity is not exercised here
    return dc;
  }
};

// ---------------------------------------------------------------------------
// Measured footprints

// Peak live elements allocated during one forward pass, excluding model
// parameters (constructed before the scope opens) but including the inputs.
inline int64_t measured_encoder_only(int64_t t_len, int64_t n_spk, const BenchConfig& cfg) {
  NoGradGuard ng;
  Rng rng(cfg.seed);
  const EncoderOnlyMock mock(cfg, rng);
  RunContext ctx{false, nullptr};
  Rng data_rng(derive_seed(cfg.seed, "bench.data", static_cast<uint64_t>(t_len * 10000 + n_spk)));
  auto& counter = ElementCounter::instance();
  counter.begin_scope();
  const auto feats = Tensor::randn({t_len, cfg.f_dim}, data_rng, 1.0);
  const auto profiles = Tensor::randn({n_spk, cfg.s_dim}, data_rng, 1.0);
  const auto out = mock.forward(feats, profiles, ctx);
  if (out->dim(0) != t_len * n_spk) throw ContractError("measured_encoder_only: bad output");
  return counter.scope_peak();
}

inline int64_t measured_seq2seq(int64_t t_len, int64_t n_spk, const BenchConfig& cfg) {
  NoGradGuard ng;
  Rng rng(cfg.seed);
  const BenchSeq2Seq model(t_len, cfg, rng);
  RunContext ctx{false, nullptr};
  Rng data_rng(derive_seed(cfg.seed, "bench.data", static_cast<uint64_t>(t_len * 10000 + n_spk)));
  auto& counter = ElementCounter::instance();
  counter.begin_scope();
  const auto feats = Tensor::randn({t_len, cfg.f_dim}, data_rng, 1.0);
  const auto profiles = Tensor::randn({n_spk, cfg.s_dim}, data_rng, 1.0);
  const auto out = model.forward(feats, profiles, ctx);
  if (out->dim(0) != n_spk || out->dim(1) != t_len)
    throw ContractError("measured_seq2seq: bad output");
  return counter.scope_peak();
}

// ---------------------------------------------------------------------------
// Grid runner

struct BenchPoint {
  int64_t t_len = 0, n_spk = 0, s_dim = 0, f_dim = 0, dim = 0;
  int64_t analytic_enc = 0, analytic_s2s = 0;
  int64_t measured_enc = -1, measured_s2s = -1;  // -1: data point failed
  bool ok_enc = false, ok_s2s = false;
};

// Points run sequentially: peak accounting must not interleave.
inline std::vector<BenchPoint> run_bench_grid(const std::vector<int64_t>& t_grid,
                                              const std::vector<int64_t>& n_grid,
                                              const BenchConfig& cfg) {
  std::vector<BenchPoint> points;
  for (int64_t t_len : t_grid)
    for (int64_t n_spk : n_grid) {
      BenchPoint p;
      p.t_len = t_len;
      p.n_spk = n_spk;
      p.s_dim = cfg.s_dim;
      p.f_dim = cfg.f_dim;
      p.dim = cfg.dim;
      p.analytic_enc = analytic_encoder_only(t_len, n_spk, cfg.s_dim, cfg.f_dim);
      p.analytic_s2s = analytic_seq2seq(t_len, n_spk, cfg.s_dim, cfg.f_dim);
      try {
        p.measured_enc = measured_encoder_only(t_len, n_spk, cfg);
        p.ok_enc = true;
      } catch (const std::bad_alloc&) {
      }
      try {
        p.measured_s2s = measured_seq2seq(t_len, n_spk, cfg);
        p.ok_s2s = true;
      } catch (const std::bad_alloc&) {
      }
      points.push_back(p);
    }
  return points;
}

// ---------------------------------------------------------------------------
// Least-squares fits

struct FitResult {
  std::vector<double> coef;  // coef[0] + coef[1]*x1 + ...
  double r2 = 0.0;
};

// Ordinary least squares with an intercept, via the normal equations.
inline FitResult fit_affine(const std::vector<std::vector<double>>& xs,
                            const std::vector<double>& ys) {
  const size_t n = ys.size();
  if (n == 0 || xs.size() != n) throw ContractError("fit_affine: empty or mismatched data");
  const size_t k = xs[0].size() + 1;
  if (n < k) throw ContractError("fit_affine: more unknowns than points");

  std::vector<std::vector<double>> a(k, std::vector<double>(k + 1, 0.0));
  for (size_t i = 0; i < n; ++i) {
    std::vector<double> row(k, 1.0);
    for (size_t j = 1; j < k; ++j) row[j] = xs[i][j - 1];
    for (size_t r = 0; r < k; ++r) {
      for (size_t c = 0; c < k; ++c) a[r][c] += row[r] * row[c];
      a[r][k] += row[r] * ys[i];
    }
  }

  // Gaussian elimination with partial pivoting on the k x (k+1) system.
  for (size_t col = 0; col < k; ++col) {
    size_t piv = col;
    for (size_t r = col + 1; r < k; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (std::fabs(a[piv][col]) < 1e-12) throw NumericError("fit_affine: singular system");
    std::swap(a[col], a[piv]);
    for (size_t r = 0; r < k; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (size_t c = col; c <= k; ++c) a[r][c] -= f * a[col][c];
    }
  }

  FitResult fit;
  fit.coef.resize(k);
  for (size_t i = 0; i < k; ++i) fit.coef[i] = a[i][k] / a[i][i];

  double mean = 0.0;
  for (double y : ys) mean += y;
  mean /= static_cast<double>(n);
  double ss_res = 0.0, ss_tot = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double pred = fit.coef[0];
    for (size_t j = 1; j < k; ++j) pred += fit.coef[j] * xs[i][j - 1];
    ss_res += (ys[i] - pred) * (ys[i] - pred);
    ss_tot += (ys[i] - mean) * (ys[i] - mean);
  }
  fit.r2 = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
  return fit;
}

// seq2seq peaks against a + b*T + c*N.
inline FitResult fit_seq2seq_peaks(const std::vector<BenchPoint>& points) {
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (const auto& p : points) {
    if (!p.ok_s2s) continue;
    xs.push_back({static_cast<double>(p.t_len), static_cast<double>(p.n_spk)});
    ys.push_back(static_cast<double>(p.measured_s2s));
  }
  return fit_affine(xs, ys);
}

// encoder-only peaks against a + b*(T*N).
inline FitResult fit_encoder_only_peaks(const std::vector<BenchPoint>& points) {
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (const auto& p : points) {
    if (!p.ok_enc) continue;
    xs.push_back({static_cast<double>(p.t_len) * static_cast<double>(p.n_spk)});
    ys.push_back(static_cast<double>(p.measured_enc));
  }
  return fit_affine(xs, ys);
}

// ---------------------------------------------------------------------------
// CSV and chart

struct BenchCsvRow {
  std::string framework;
  int64_t t_len = 0, n_spk = 0;
  int64_t analytic = 0, measured = -1;
};

inline std::vector<BenchCsvRow> bench_csv_rows(const std::vector<BenchPoint>& points) {
  std::vector<BenchCsvRow> rows;
  for (const auto& p : points) {
    rows.push_back({"encoder_only", p.t_len, p.n_spk, p.analytic_enc, p.measured_enc});
    rows.push_back({"seq2seq", p.t_len, p.n_spk, p.analytic_s2s, p.measured_s2s});
  }
  return rows;
}

inline void write_bench_csv(const std::vector<BenchPoint>& points, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("write_bench_csv: cannot open " + path);
  out << "framework,T,N,analytic,measured\n";
  for (const auto& r : bench_csv_rows(points))
    out << r.framework << ',' << r.t_len << ',' << r.n_spk << ',' << r.analytic << ','
        << r.measured << '\n';
  if (!out) throw FormatError("write_bench_csv: write failed: " + path);
}

inline std::vector<BenchCsvRow> parse_bench_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("parse_bench_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "framework,T,N,analytic,measured")
    throw FormatError("parse_bench_csv: bad header in " + path);
  std::vector<BenchCsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    BenchCsvRow r;
    std::string field;
    if (!std::getline(ss, r.framework, ',')) throw FormatError("parse_bench_csv: bad row");
    auto next = [&ss, &field, &path]() {
      if (!std::getline(ss, field, ',')) throw FormatError("parse_bench_csv: bad row in " + path);
      return std::stoll(field);
    };
    r.t_len = next();
    r.n_spk = next();
    r.analytic = next();
    r.measured = next();
    rows.push_back(r);
  }
  return rows;
}

// One bar per grid point, grouped by framework and N, T ascending within a
// group.  Bars are scaled to the global maximum.
inline std::string bench_chart(const std::vector<BenchPoint>& points, int width = 50) {
  const auto rows = bench_csv_rows(points);
  int64_t max_measured = 1;
  for (const auto& r : rows) max_measured = std::max(max_measured, r.measured);

  std::vector<BenchCsvRow> sorted = rows;
  std::stable_sort(sorted.begin(), sorted.end(), [](const BenchCsvRow& a, const BenchCsvRow& b) {
    if (a.framework != b.framework) return a.framework < b.framework;
    if (a.n_spk != b.n_spk) return a.n_spk < b.n_spk;
    return a.t_len < b.t_len;
  });

  std::ostringstream out;
  out << "peak live elements (max " << max_measured << ")\n";
  for (const auto& r : sorted) {
    const int bar = r.measured < 0
                        ? 0
                        : static_cast<int>(static_cast<double>(r.measured) /
                                           static_cast<double>(max_measured) * width);
    char label[96];
    std::snprintf(label, sizeof(label), "%-12s N=%-3lld T=%-5lld ", r.framework.c_str(),
                  static_cast<long long>(r.n_spk), static_cast<long long>(r.t_len));
    out << label;
    for (int i = 0; i < bar; ++i) out << '#';
    if (r.measured < 0)
      out << " FAILED";
    else
      out << ' ' << r.measured;
    out << '\n';
  }
  return out.str();
}

}  // namespace seqdiar

#endif  // SEQDIAR_MEMBENCH_HPP_
