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

#include <gtest/gtest.h>

#include <sstream>

#include "seqdiar/annotation.hpp"
#include "seqdiar/rng.hpp"

namespace seqdiar {
namespace {

TEST(Timeline, MergesTouchingAndOverlapping) {
  Timeline t({{0.0, 1.0}, {1.0, 2.0}, {3.0, 4.0}, {3.5, 5.0}});
  ASSERT_EQ(t.iv.size(), 2u);
  EXPECT_DOUBLE_EQ(t.iv[0].a, 0.0);
  EXPECT_DOUBLE_EQ(t.iv[0].b, 2.0);
  EXPECT_DOUBLE_EQ(t.iv[1].a, 3.0);
  EXPECT_DOUBLE_EQ(t.iv[1].b, 5.0);
  EXPECT_DOUBLE_EQ(t.total(), 4.0);
}

TEST(Timeline, DropsEmptyAndInvertedIntervals) {
  Timeline t({{2.0, 2.0}, {5.0, 4.0}, {0.0, 1.0}});
  ASSERT_EQ(t.iv.size(), 1u);
  EXPECT_DOUBLE_EQ(t.total(), 1.0);
}

TEST(Timeline, ContainsUsesHalfOpenIntervals) {
  Timeline t({{1.0, 2.0}});
  EXPECT_FALSE(t.contains(0.5));
  EXPECT_TRUE(t.contains(1.0));
  EXPECT_TRUE(t.contains(1.5));
  EXPECT_FALSE(t.contains(2.0));
}

TEST(Timeline, IntersectHandCase) {
  Timeline a({{0.0, 4.0}, {6.0, 9.0}});
  Timeline b({{2.0, 7.0}});
  const auto c = a.intersect(b);
  ASSERT_EQ(c.iv.size(), 2u);
  EXPECT_DOUBLE_EQ(c.iv[0].a, 2.0);
  EXPECT_DOUBLE_EQ(c.iv[0].b, 4.0);
  EXPECT_DOUBLE_EQ(c.iv[1].a, 6.0);
  EXPECT_DOUBLE_EQ(c.iv[1].b, 7.0);
  EXPECT_DOUBLE_EQ(c.total(), 3.0);
}

// Inclusion-exclusion |A| + |B| = |A u B| + |A n B| on random interval sets.
TEST(Timeline, UnionIntersectionInclusionExclusion) {
  Rng rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Interval> ai, bi;
    const int na = static_cast<int>(rng.uniform_int(1, 6));
    const int nb = static_cast<int>(rng.uniform_int(1, 6));
    for (int i = 0; i < na; ++i) {
      const double s = rng.uniform(0.0, 10.0);
      ai.push_back({s, s + rng.uniform(0.0, 3.0)});
    }
    for (int i = 0; i < nb; ++i) {
      const double s = rng.uniform(0.0, 10.0);
      bi.push_back({s, s + rng.uniform(0.0, 3.0)});
    }
    Timeline a(std::move(ai)), b(std::move(bi));
    const double lhs = a.total() + b.total();
    const double rhs = a.unite(b).total() + a.intersect(b).total();
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(Timeline, SubtractHandCase) {
  Timeline a({{0.0, 10.0}});
  Timeline b({{2.0, 3.0}, {5.0, 7.0}, {9.5, 12.0}});
  const Timeline d = a.subtract(b);
  ASSERT_EQ(d.iv.size(), 3u);
  EXPECT_DOUBLE_EQ(d.iv[0].a, 0.0);
  EXPECT_DOUBLE_EQ(d.iv[0].b, 2.0);
  EXPECT_DOUBLE_EQ(d.iv[1].a, 3.0);
  EXPECT_DOUBLE_EQ(d.iv[1].b, 5.0);
  EXPECT_DOUBLE_EQ(d.iv[2].a, 7.0);
  EXPECT_DOUBLE_EQ(d.iv[2].b, 9.5);
  EXPECT_EQ(a.subtract(a).total(), 0.0);
  EXPECT_DOUBLE_EQ(a.subtract(Timeline{}).total(), 10.0);
}

// |A \ B| = |A| - |A n B| on random interval sets, and the difference is
// disjoint from B.
TEST(Timeline, SubtractMatchesIntersectionComplement) {
  Rng rng(505);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Interval> ai, bi;
    const int na = static_cast<int>(rng.uniform_int(1, 6));
    const int nb = static_cast<int>(rng.uniform_int(1, 6));
    for (int i = 0; i < na; ++i) {
      const double s = rng.uniform(0.0, 10.0);
      ai.push_back({s, s + rng.uniform(0.0, 3.0)});
    }
    for (int i = 0; i < nb; ++i) {
      const double s = rng.uniform(0.0, 10.0);
      bi.push_back({s, s + rng.uniform(0.0, 3.0)});
    }
    Timeline a(std::move(ai)), b(std::move(bi));
    const Timeline d = a.subtract(b);
    EXPECT_NEAR(d.total(), a.total() - a.intersect(b).total(), 1e-12);
    EXPECT_NEAR(d.intersect(b).total(), 0.0, 1e-12);
    EXPECT_NEAR(d.unite(a.intersect(b)).total(), a.total(), 1e-12);
  }
}

TEST(Annotation, SpeakersSortedAndTimelinesSeparate) {
  Annotation ann;
  ann.segments = {{"bob", 0.0, 1.0}, {"alice", 0.5, 2.0}, {"bob", 3.0, 4.0}};
  const auto spk = ann.speakers();
  ASSERT_EQ(spk.size(), 2u);
  EXPECT_EQ(spk[0], "alice");
  EXPECT_EQ(spk[1], "bob");
  EXPECT_DOUBLE_EQ(ann.speaker_timeline("bob").total(), 2.0);
  EXPECT_DOUBLE_EQ(ann.speaker_timeline("alice").total(), 1.5);
  EXPECT_DOUBLE_EQ(ann.support().total(), 3.0);
  EXPECT_DOUBLE_EQ(ann.extent_end(), 4.0);
}

TEST(Rttm, ParsesWellFormedInput) {
  const std::string text =
      "; a comment line\n"
      "\n"
      "SPEAKER rec1 1 0.000 1.500 <NA> <NA> alice <NA> <NA>\n"
      "SPEAKER rec1 1 1.000 2.000 <NA> <NA> bob <NA> <NA>\n"
      "SPEAKER rec2 1 5.250 0.750 <NA> <NA> carol <NA> <NA>\n";
  const auto files = parse_rttm_string(text);
  ASSERT_EQ(files.size(), 2u);
  const auto& r1 = files.at("rec1");
  ASSERT_EQ(r1.segments.size(), 2u);
  EXPECT_EQ(r1.segments[0].speaker, "alice");
  EXPECT_DOUBLE_EQ(r1.segments[0].onset, 0.0);
  EXPECT_DOUBLE_EQ(r1.segments[0].offset, 1.5);
  EXPECT_EQ(r1.segments[1].speaker, "bob");
  EXPECT_DOUBLE_EQ(r1.segments[1].offset, 3.0);
  const auto& r2 = files.at("rec2");
  ASSERT_EQ(r2.segments.size(), 1u);
  EXPECT_DOUBLE_EQ(r2.segments[0].onset, 5.25);
  EXPECT_DOUBLE_EQ(r2.segments[0].offset, 6.0);
}

TEST(Rttm, RejectsMalformedLines) {
  EXPECT_THROW(parse_rttm_string("SPEAKER rec1 1 0.0 1.0 <NA> <NA>\n"), FormatError);
  EXPECT_THROW(parse_rttm_string("LEXEME rec1 1 0.0 1.0 <NA> <NA> a <NA> <NA>\n"), FormatError);
  EXPECT_THROW(parse_rttm_string("SPEAKER rec1 1 zero 1.0 <NA> <NA> a <NA> <NA>\n"), FormatError);
  EXPECT_THROW(parse_rttm_string("SPEAKER rec1 1 -1.0 1.0 <NA> <NA> a <NA> <NA>\n"), FormatError);
  EXPECT_THROW(parse_rttm_string("SPEAKER rec1 1 0.0 -1.0 <NA> <NA> a <NA> <NA>\n"), FormatError);
}

// Times on a millisecond grid survive emit -> parse with exact doubles.
TEST(Rttm, RoundTripIsExactOnMillisecondGrid) {
  Rng rng(777);
  std::map<std::string, Annotation> files;
  for (int f = 0; f < 3; ++f) {
    Annotation ann;
    for (int s = 0; s < 40; ++s) {
      const double onset = static_cast<double>(rng.uniform_int(0, 600000)) / 1000.0;
      const double dur = static_cast<double>(rng.uniform_int(1, 30000)) / 1000.0;
      ann.segments.push_back({"spk" + std::to_string(rng.uniform_int(0, 5)), onset, onset + dur});
    }
    ann.sort_by_onset();
    files["file" + std::to_string(f)] = std::move(ann);
  }
  std::ostringstream out;
  emit_rttm(files, out);
  const auto parsed = parse_rttm_string(out.str());
  ASSERT_EQ(parsed.size(), files.size());
  for (const auto& [id, ann] : files) {
    const auto& got = parsed.at(id);
    ASSERT_EQ(got.segments.size(), ann.segments.size());
    for (size_t i = 0; i < ann.segments.size(); ++i) {
      EXPECT_EQ(got.segments[i].speaker, ann.segments[i].speaker);
      EXPECT_EQ(got.segments[i].onset, ann.segments[i].onset);
      // Offset is reconstructed as onset + duration; the emitter writes the
      // duration with enough digits that the sum is reproduced exactly.
      EXPECT_EQ(got.segments[i].offset, ann.segments[i].offset);
    }
  }
}

TEST(Rttm, EmitOrdersByFileThenOnset) {
  std::map<std::string, Annotation> files;
  Annotation ann;
  ann.segments = {{"b", 5.0, 6.0}, {"a", 1.0, 2.0}};
  files["z"] = ann;
  files["a"] = ann;
  std::ostringstream out;
  emit_rttm(files, out);
  std::istringstream in(out.str());
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_NE(lines[0].find(" a 1 1.0"), std::string::npos);
  EXPECT_NE(lines[1].find(" a 1 5.0"), std::string::npos);
  EXPECT_NE(lines[2].find(" z 1 1.0"), std::string::npos);
  EXPECT_NE(lines[3].find(" z 1 5.0"), std::string::npos);
}

}  // namespace
}  // namespace seqdiar
