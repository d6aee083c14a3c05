// seqdiar/clustering.hpp
//
// Agglomerative clustering with average linkage over cosine distances, used
// by the first-pass diarizer.  Naive O(n^3): merge the closest pair until the
// closest average distance reaches the threshold.  Window counts are in the
// hundreds at this scale, so the cubic bound is irrelevant.

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
#include <vector>

#include "seqdiar/common.hpp"

namespace seqdiar {

// 1 - cos(a, b), in [0, 2] for non-degenerate inputs.  A zero vector is
// treated as maximally distant from everything.
inline double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ContractError("cosine_distance: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 2.0;
  return 1.0 - dot / std::sqrt(na * nb);
}

// Average-linkage agglomerative clustering.  Returns one label per item;
// labels are dense and numbered by first appearance, so the item order alone
// fixes the labelling.  Merging stops when the smallest average inter-cluster
// distance is >= threshold.  Ties pick the lexicographically smallest active
// cluster index pair, which keeps the result deterministic.
inline std::vector<int> ahc_average_linkage(const std::vector<std::vector<double>>& items,
                                            double threshold) {
  const size_t n = items.size();
  if (n == 0) return {};
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) dist[i][j] = dist[j][i] = cosine_distance(items[i], items[j]);

  std::vector<std::vector<size_t>> members(n);
  for (size_t i = 0; i < n; ++i) members[i] = {i};
  std::vector<bool> alive(n, true);

  auto linkage = [&](size_t a, size_t b) {
    double s = 0.0;
    for (size_t i : members[a])
      for (size_t j : members[b]) s += dist[i][j];
    return s / (static_cast<double>(members[a].size()) * static_cast<double>(members[b].size()));
  };

  while (true) {
    double best = threshold;
    size_t ba = n, bb = n;
    for (size_t a = 0; a < n; ++a) {
      if (!alive[a]) continue;
      for (size_t b = a + 1; b < n; ++b) {
        if (!alive[b]) continue;
        const double d = linkage(a, b);
        if (d < best) {
          best = d;
          ba = a;
          bb = b;
        }
      }
    }
    if (ba == n) break;
    members[ba].insert(members[ba].end(), members[bb].begin(), members[bb].end());
    members[bb].clear();
    alive[bb] = false;
  }

  // Merges fold into the smaller index, so a surviving cluster's index is its
  // minimum member; scanning ascending numbers clusters by first appearance.
  std::vector<int> label(n, -1);
  int next = 0;
  for (size_t c = 0; c < n; ++c) {
    if (!alive[c]) continue;
    for (size_t m : members[c]) label[m] = next;
    ++next;
  }
  return label;
}

}  // namespace seqdiar
