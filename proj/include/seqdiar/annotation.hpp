// seqdiar/annotation.hpp
//
// Speaker segment annotations, interval timelines, and RTTM parsing and
// emission.

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
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "seqdiar/common.hpp"

namespace seqdiar {

struct Interval {
  double a = 0.0, b = 0.0;
  double length() const { return b - a; }
};

// Sorted union of disjoint half-open intervals.
class Timeline {
 public:
  std::vector<Interval> iv;

  Timeline() = default;
  explicit Timeline(std::vector<Interval> raw) {
    std::sort(raw.begin(), raw.end(), [](const Interval& x, const Interval& y) { return x.a < y.a; });
    for (const auto& r : raw) {
      if (r.b <= r.a) continue;
      if (!iv.empty() && r.a <= iv.back().b)
        iv.back().b = std::max(iv.back().b, r.b);
      else
        iv.push_back(r);
    }
  }

  double total() const {
    double s = 0.0;
    for (const auto& i : iv) s += i.length();
    return s;
  }

  bool contains(double t) const {
    for (const auto& i : iv) {
      if (t < i.a) return false;
      if (t < i.b) return true;
    }
    return false;
  }

  Timeline unite(const Timeline& other) const {
    std::vector<Interval> all = iv;
    all.insert(all.end(), other.iv.begin(), other.iv.end());
    return Timeline(std::move(all));
  }

  Timeline intersect(const Timeline& other) const {
    std::vector<Interval> out;
    size_t i = 0, j = 0;
    while (i < iv.size() && j < other.iv.size()) {
      const double lo = std::max(iv[i].a, other.iv[j].a);
      const double hi = std::min(iv[i].b, other.iv[j].b);
      if (lo < hi) out.push_back({lo, hi});
      if (iv[i].b < other.iv[j].b)
        ++i;
      else
        ++j;
    }
    Timeline t;
    t.iv = std::move(out);  // already sorted and disjoint
    return t;
  }

  Timeline subtract(const Timeline& other) const {
    std::vector<Interval> out;
    for (const auto& keep : iv) {
      double a = keep.a;
      for (const auto& cut : other.iv) {
        if (cut.b <= a) continue;
        if (cut.a >= keep.b) break;
        if (cut.a > a) out.push_back({a, cut.a});
        a = std::max(a, cut.b);
        if (a >= keep.b) break;
      }
      if (a < keep.b) out.push_back({a, keep.b});
    }
    Timeline t;
    t.iv = std::move(out);  // sorted, disjoint, non-touching by construction
    return t;
  }
};

struct Segment {
  std::string speaker;
  double onset = 0.0;
  double offset = 0.0;

  double duration() const { return offset - onset; }
};

struct Annotation {
  std::vector<Segment> segments;

  std::vector<std::string> speakers() const {
    std::set<std::string> s;
    for (const auto& seg : segments) s.insert(seg.speaker);
    return {s.begin(), s.end()};
  }

  Timeline speaker_timeline(const std::string& name) const {
    std::vector<Interval> iv;
    for (const auto& seg : segments)
      if (seg.speaker == name) iv.push_back({seg.onset, seg.offset});
    return Timeline(std::move(iv));
  }

  Timeline support() const {
    std::vector<Interval> iv;
    iv.reserve(segments.size());
    for (const auto& seg : segments) iv.push_back({seg.onset, seg.offset});
    return Timeline(std::move(iv));
  }

  double extent_end() const {
    double e = 0.0;
    for (const auto& seg : segments) e = std::max(e, seg.offset);
    return e;
  }

  void sort_by_onset() {
    std::sort(segments.begin(), segments.end(), [](const Segment& x, const Segment& y) {
      if (x.onset != y.onset) return x.onset < y.onset;
      return x.speaker < y.speaker;
    });
  }
};

// Parses RTTM SPEAKER lines grouped by file id.  Comment lines starting
// with ';' and blank lines are skipped; anything else malformed throws.
inline std::map<std::string, Annotation> parse_rttm(std::istream& in) {
  std::map<std::string, Annotation> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == ';') continue;
    std::istringstream ls(line);
    std::string type, file, chan, ortho, stype, name, conf, slat;
    double onset = 0.0, dur = 0.0;
    if (!(ls >> type >> file >> chan >> onset >> dur >> ortho >> stype >> name))
      throw FormatError("rttm: malformed line " + std::to_string(lineno) + ": " + line);
    if (type != "SPEAKER")
      throw FormatError("rttm: unsupported record type on line " + std::to_string(lineno));
    if (dur < 0.0 || onset < 0.0)
      throw FormatError("rttm: negative time on line " + std::to_string(lineno));
    out[file].segments.push_back({name, onset, onset + dur});
  }
  for (auto& [_, ann] : out) ann.sort_by_onset();
  return out;
}

inline std::map<std::string, Annotation> parse_rttm_string(const std::string& text) {
  std::istringstream in(text);
  return parse_rttm(in);
}

inline std::string emit_rttm(const std::string& file_id, const Annotation& ann) {
  Annotation sorted = ann;
  sorted.sort_by_onset();
  std::ostringstream out;
  char buf[256];
  for (const auto& seg : sorted.segments) {
    std::snprintf(buf, sizeof(buf), "SPEAKER %s 1 %.9f %.9f <NA> <NA> %s <NA> <NA>\n",
                  file_id.c_str(), seg.onset, seg.duration(), seg.speaker.c_str());
    out << buf;
  }
  return out.str();
}

inline void emit_rttm(const std::map<std::string, Annotation>& files, std::ostream& out) {
  for (const auto& [file_id, ann] : files) out << emit_rttm(file_id, ann);
}

}  // namespace seqdiar
