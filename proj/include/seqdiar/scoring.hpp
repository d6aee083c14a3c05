// seqdiar/scoring.hpp
//
// Diarization scoring: optimal speaker mapping, DER with a no-score collar
// around reference boundaries, and per-speaker Jaccard error rate.
//
// DER follows the usual sweep over elementary intervals: between consecutive
// boundary points the active reference count Nr, hypothesis count Nh, and
// correctly matched count Nc are constant, contributing
//   miss      += dur * max(0, Nr - Nh)
//   false al. += dur * max(0, Nh - Nr)
//   confusion += dur * (min(Nr, Nh) - Nc)
// against a denominator of dur * Nr.  Intervals inside the collar around any
// reference segment boundary are excluded; the speaker mapping itself is
// computed on uncollared overlaps.

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
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "seqdiar/annotation.hpp"

namespace seqdiar {

// Maximum-score assignment for a non-negative score matrix [n x m].
// Returns row -> column (or -1).  O(k^3) Hungarian on the padded square.
inline std::vector<int> hungarian_max(const std::vector<std::vector<double>>& score) {
  const int n = static_cast<int>(score.size());
  if (n == 0) return {};
  const int m = static_cast<int>(score[0].size());
  for (const auto& row : score)
    if (static_cast<int>(row.size()) != m) throw ContractError("hungarian_max: ragged matrix");
  if (m == 0) return std::vector<int>(static_cast<size_t>(n), -1);
  const int k = std::max(n, m);

  // Minimise negated scores on a k x k square padded with zeros.
  std::vector<std::vector<double>> a(static_cast<size_t>(k) + 1,
                                     std::vector<double>(static_cast<size_t>(k) + 1, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) a[static_cast<size_t>(i) + 1][static_cast<size_t>(j) + 1] = -score[static_cast<size_t>(i)][static_cast<size_t>(j)];

  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(k) + 1, 0.0), v(static_cast<size_t>(k) + 1, 0.0);
  std::vector<int> p(static_cast<size_t>(k) + 1, 0), way(static_cast<size_t>(k) + 1, 0);
  for (int i = 1; i <= k; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(k) + 1, kInf);
    std::vector<char> used(static_cast<size_t>(k) + 1, false);
    do {
      used[static_cast<size_t>(j0)] = true;
      const int i0 = p[static_cast<size_t>(j0)];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= k; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = a[static_cast<size_t>(i0)][static_cast<size_t>(j)] - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= k; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> match(static_cast<size_t>(n), -1);
  for (int j = 1; j <= k; ++j) {
    const int i = p[static_cast<size_t>(j)];
    if (i >= 1 && i <= n && j <= m) match[static_cast<size_t>(i) - 1] = j - 1;
  }
  return match;
}

struct FileScore {
  std::string file_id;
  double miss = 0.0, falarm = 0.0, confusion = 0.0;  // seconds
  double ref_speech = 0.0;                           // scored ref speaker-seconds
  double der() const {
    if (ref_speech <= 0.0) throw NumericError("der: no scored reference speech");
    return (miss + falarm + confusion) / ref_speech;
  }
};

struct ScoreReport {
  double miss = 0.0, falarm = 0.0, confusion = 0.0, ref_speech = 0.0;
  double jer_sum = 0.0;  // per-reference-speaker Jaccard error, summed
  int64_t jer_count = 0;
  std::vector<FileScore> files;

  double der() const {
    if (ref_speech <= 0.0) throw NumericError("der: no scored reference speech");
    return (miss + falarm + confusion) / ref_speech;
  }
  double der_pct() const { return 100.0 * der(); }
  double jer_pct() const {
    if (jer_count == 0) throw NumericError("jer: no reference speakers");
    return 100.0 * jer_sum / static_cast<double>(jer_count);
  }
  double miss_pct() const { return 100.0 * miss / ref_speech; }
  double falarm_pct() const { return 100.0 * falarm / ref_speech; }
  double confusion_pct() const { return 100.0 * confusion / ref_speech; }
};

// Optimal ref -> hyp speaker mapping by total uncollared overlap.
inline std::map<std::string, std::string> optimal_mapping(const Annotation& ref,
                                                          const Annotation& hyp) {
  const auto rs = ref.speakers();
  const auto hs = hyp.speakers();
  if (rs.empty() || hs.empty()) return {};
  std::vector<std::vector<double>> overlap(rs.size(), std::vector<double>(hs.size(), 0.0));
  std::vector<Timeline> rt, ht;
  rt.reserve(rs.size());
  ht.reserve(hs.size());
  for (const auto& s : rs) rt.push_back(ref.speaker_timeline(s));
  for (const auto& s : hs) ht.push_back(hyp.speaker_timeline(s));
  for (size_t i = 0; i < rs.size(); ++i)
    for (size_t j = 0; j < hs.size(); ++j) overlap[i][j] = rt[i].intersect(ht[j]).total();
  const auto match = hungarian_max(overlap);
  std::map<std::string, std::string> mapping;
  for (size_t i = 0; i < rs.size(); ++i)
    if (match[i] >= 0 && overlap[i][static_cast<size_t>(match[i])] > 0.0)
      mapping[rs[i]] = hs[static_cast<size_t>(match[i])];
  return mapping;
}

// Scores one file pair.  jer_* accumulate into the report by the caller.
inline FileScore score_file(const Annotation& ref, const Annotation& hyp, double collar,
                            const std::string& file_id = "") {
  if (ref.segments.empty()) throw NumericError("score_file: empty reference for " + file_id);
  const auto mapping = optimal_mapping(ref, hyp);
  const auto rs = ref.speakers();
  const auto hs = hyp.speakers();
  std::vector<Timeline> rt, ht;
  for (const auto& s : rs) rt.push_back(ref.speaker_timeline(s));
  for (const auto& s : hs) ht.push_back(hyp.speaker_timeline(s));
  // mapped_hyp[i]: index into hs for ref speaker i, or -1.
  std::vector<int> mapped_hyp(rs.size(), -1);
  for (size_t i = 0; i < rs.size(); ++i) {
    const auto it = mapping.find(rs[i]);
    if (it == mapping.end()) continue;
    for (size_t j = 0; j < hs.size(); ++j)
      if (hs[j] == it->second) mapped_hyp[i] = static_cast<int>(j);
  }

  // Collar: no-score zones around every reference segment boundary.
  std::vector<Interval> collar_iv;
  if (collar > 0.0)
    for (const auto& seg : ref.segments) {
      collar_iv.push_back({seg.onset - collar, seg.onset + collar});
      collar_iv.push_back({seg.offset - collar, seg.offset + collar});
    }
  const Timeline collar_tl{std::move(collar_iv)};

  // Elementary interval boundaries.
  std::vector<double> pts;
  for (const auto& seg : ref.segments) {
    pts.push_back(seg.onset);
    pts.push_back(seg.offset);
  }
  for (const auto& seg : hyp.segments) {
    pts.push_back(seg.onset);
    pts.push_back(seg.offset);
  }
  for (const auto& i : collar_tl.iv) {
    pts.push_back(i.a);
    pts.push_back(i.b);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  FileScore fs;
  fs.file_id = file_id;
  for (size_t pi = 0; pi + 1 < pts.size(); ++pi) {
    const double a = pts[pi], b = pts[pi + 1];
    const double dur = b - a;
    if (dur <= 0.0) continue;
    const double mid = 0.5 * (a + b);
    if (collar_tl.contains(mid)) continue;
    int nr = 0, nh = 0, nc = 0;
    std::vector<char> hyp_active(hs.size(), 0);
    for (size_t j = 0; j < hs.size(); ++j)
      if (ht[j].contains(mid)) {
        hyp_active[j] = 1;
        ++nh;
      }
    for (size_t i = 0; i < rs.size(); ++i) {
      if (!rt[i].contains(mid)) continue;
      ++nr;
      if (mapped_hyp[i] >= 0 && hyp_active[static_cast<size_t>(mapped_hyp[i])]) ++nc;
    }
    if (nr == 0 && nh == 0) continue;
    fs.ref_speech += dur * nr;
    fs.miss += dur * std::max(0, nr - nh);
    fs.falarm += dur * std::max(0, nh - nr);
    fs.confusion += dur * (std::min(nr, nh) - nc);
  }
  return fs;
}

// Per-reference-speaker Jaccard error contributions (no collar).
inline void accumulate_jer(const Annotation& ref, const Annotation& hyp, ScoreReport& rep) {
  const auto mapping = optimal_mapping(ref, hyp);
  for (const auto& r : ref.speakers()) {
    const auto rt = ref.speaker_timeline(r);
    const auto it = mapping.find(r);
    double jer = 1.0;
    if (it != mapping.end()) {
      const auto ht = hyp.speaker_timeline(it->second);
      const double uni = rt.unite(ht).total();
      if (uni > 0.0) jer = 1.0 - rt.intersect(ht).total() / uni;
    }
    rep.jer_sum += jer;
    ++rep.jer_count;
  }
}

// Scores all reference files; missing hypothesis files count as silence.
inline ScoreReport score_annotations(const std::map<std::string, Annotation>& ref,
                                     const std::map<std::string, Annotation>& hyp,
                                     double collar = 0.25) {
  if (ref.empty()) throw NumericError("score_annotations: empty reference");
  ScoreReport rep;
  static const Annotation kEmpty;
  for (const auto& [file_id, r] : ref) {
    const auto it = hyp.find(file_id);
    const Annotation& h = it == hyp.end() ? kEmpty : it->second;
    FileScore fs = score_file(r, h, collar, file_id);
    rep.miss += fs.miss;
    rep.falarm += fs.falarm;
    rep.confusion += fs.confusion;
    rep.ref_speech += fs.ref_speech;
    rep.files.push_back(std::move(fs));
    accumulate_jer(r, h, rep);
  }
  return rep;
}

}  // namespace seqdiar
