// Copyright 2026 The PB-DSR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <map>

#include "doctest.h"
#include "pbdsr/error.hpp"
#include "pbdsr/synthgen.hpp"

using namespace pbdsr;

namespace {

// Utterances of one speaker keyed by (block, word, rep) order.
std::vector<const FeatureSequence*> of_speaker(const Corpus& c, const std::string& s) {
  std::vector<const FeatureSequence*> out;
  for (const auto& u : c.utterances) {
    if (u.speaker_id == s) out.push_back(&u);
  }
  return out;
}

RowVector mean_frame(const FeatureSequence& u) {
  return u.frames.cast<double>().colwise().mean();
}

// Mean over matched utterances of the distance between mean frames.
double displacement(const Corpus& c, const std::string& a, const std::string& b) {
  const auto ua = of_speaker(c, a);
  const auto ub = of_speaker(c, b);
  REQUIRE(ua.size() == ub.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < ua.size(); ++i) {
    REQUIRE(ua[i]->word_id == ub[i]->word_id);
    sum += (mean_frame(*ua[i]) - mean_frame(*ub[i])).norm();
  }
  return sum / static_cast<double>(ua.size());
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
  SynthConfig c;
  const auto a = generate(c);
  const auto b = generate(c);
  REQUIRE(a.utterances.size() == b.utterances.size());
  for (std::size_t i = 0; i < a.utterances.size(); ++i) {
    CHECK(a.utterances[i].utterance_id == b.utterances[i].utterance_id);
    CHECK(a.utterances[i].frames == b.utterances[i].frames);
  }
  c.seed = 2;
  CHECK(generate(c).utterances[0].frames != a.utterances[0].frames);
}

TEST_CASE("counts and label balance") {
  SynthConfig c;
  c.words = 7;
  c.speakers = 3;
  c.severities = {0.0, 0.3, 0.6};
  c.reps_per_block = 3;
  const auto corpus = generate(c);
  CHECK(corpus.utterances.size() == 7u * 3u * 3u * 3u);
  CHECK(corpus.vocabulary.word_count() == 7);
  std::map<std::tuple<std::string, int, int>, int> cells;
  for (const auto& u : corpus.utterances) {
    ++cells[{u.speaker_id, u.block, u.word_id}];
    CHECK(u.channel == 1);
    CHECK(u.frames.rows() >= c.min_frames);
    CHECK(u.frames.rows() <= c.max_frames);
    CHECK(u.frames.cols() == c.input_dim);
  }
  CHECK(cells.size() == 3u * 3u * 7u);
  for (const auto& [key, n] : cells) CHECK(n == 3);
}

TEST_CASE("zero shift and zero noise give identical frames across speakers") {
  SynthConfig c;
  c.severities.assign(6, 0.0);
  c.noise_std = 0.0;
  const auto corpus = generate(c);
  std::map<int, RowVector> first;
  for (const auto& u : corpus.utterances) {
    const Matrix f = u.frames.cast<double>();
    auto [it, inserted] = first.emplace(u.word_id, f.row(0));
    for (Eigen::Index t = 0; t < f.rows(); ++t) CHECK(f.row(t) == it->second);
    CHECK(std::abs(it->second.norm() - 1.0) <= 1e-6);
  }
  CHECK(first.size() == 20u);
}

TEST_CASE("shift displacement exceeds the zero-shift baseline") {
  SynthConfig c;
  c.speakers = 3;
  c.severities = {0.0, 0.0, 0.5};
  const auto corpus = generate(c);
  CHECK(displacement(corpus, "S00", "S02") > displacement(corpus, "S00", "S01"));
}

TEST_CASE("displacement from anchors grows with severity") {
  double previous = -1.0;
  for (double sigma : {0.1, 0.4, 0.8}) {
    SynthConfig c;
    c.speakers = 2;
    c.severities = {0.0, sigma};
    c.noise_std = 0.0;
    const auto corpus = generate(c);
    const double d = displacement(corpus, "S00", "S01");
    CHECK(d >= previous);
    previous = d;
  }
}

TEST_CASE("severity tiers and default config") {
  CHECK(level_for_severity(0.0) == Intelligibility::kHigh);
  CHECK(level_for_severity(0.2) == Intelligibility::kHigh);
  CHECK(level_for_severity(0.25) == Intelligibility::kMid);
  CHECK(level_for_severity(0.35) == Intelligibility::kLow);
  CHECK(level_for_severity(0.45) == Intelligibility::kVeryLow);
  CHECK(level_for_severity(9.0) == Intelligibility::kVeryLow);
  const auto corpus = generate(SynthConfig{});
  std::map<Intelligibility, int> tiers;
  for (const auto& s : corpus.speakers) ++tiers[s.level];
  CHECK(tiers.size() == 4u);
  CHECK(tiers.count(Intelligibility::kControl) == 0);
}

TEST_CASE("invalid configs are rejected") {
  auto bad = [](auto mutate) {
    SynthConfig c;
    mutate(c);
    CHECK_THROWS_AS(generate(c), ValidationError);
  };
  bad([](SynthConfig& c) { c.words = 1; });
  bad([](SynthConfig& c) { c.speakers = 1; c.severities = {0.1}; });
  bad([](SynthConfig& c) { c.input_dim = 1; });
  bad([](SynthConfig& c) { c.severities.pop_back(); });
  bad([](SynthConfig& c) { c.severities[0] = -0.1; });
  bad([](SynthConfig& c) { c.min_frames = 5; c.max_frames = 4; });
  bad([](SynthConfig& c) { c.noise_std = -1.0; });
}
