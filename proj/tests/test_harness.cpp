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

#include <cmath>
#include <set>

#include "doctest.h"
#include "pbdsr/harness.hpp"
#include "pbdsr/synthgen.hpp"
#include "json.hpp"

using namespace pbdsr;

namespace {

Corpus toy_corpus() {
  SynthConfig c;
  c.words = 4;
  c.speakers = 3;
  c.severities = {0.1, 0.3, 0.5};
  c.reps_per_block = 1;
  c.input_dim = 6;
  c.seed = 7;
  return generate(c);
}

HarnessConfig toy_config() {
  HarnessConfig h;
  h.train.max_epochs = 3;
  h.train.batch_size = 4;
  h.train.hidden_dims = {8, 6};
  h.finetune.max_epochs = 2;
  h.finetune.batch_size = 4;
  h.seed = 11;
  return h;
}

}  // namespace

TEST_CASE("report shape") {
  const auto corpus = toy_corpus();
  const auto report = run_loso(corpus, toy_config());
  REQUIRE(report.columns.size() == kAllModels.size());
  for (std::size_t i = 0; i < kAllModels.size(); ++i) {
    const auto& col = report.columns[i];
    CHECK(col.model == kAllModels[i]);
    REQUIRE(col.speakers.size() == 3u);
    for (const auto& s : col.speakers) {
      CHECK(s.utterances == 4);
      CHECK(s.wer() >= 0.0);
    }
  }
  CHECK(report.clusters.size() == 3u * 5u);
  CHECK(report.column(ModelKind::kPbDsr) != nullptr);
  for (const auto& cl : report.clusters) CHECK(cl.metrics.ratio >= 0.0);

  const auto csv = report.to_csv();
  CHECK(csv.rfind("row,level,V,V+,R,R+,PB-DSR,PB-DSR+,FT-R,FT-R+PB-DSR\n", 0) == 0);
  const auto json = nlohmann::json::parse(report.to_json());
  CHECK(json["seed"] == 11);
  CHECK(json["columns"].size() == 8u);

  auto unseen_only = toy_config();
  unseen_only.include_seen = false;
  const auto held = run_loso(corpus, unseen_only);
  CHECK(held.columns.size() == 6u);
  CHECK(held.column(ModelKind::kV) == nullptr);
  CHECK(held.columns[0].model == ModelKind::kR);
}

TEST_CASE("reports are deterministic and independent of job count") {
  const auto corpus = toy_corpus();
  auto config = toy_config();
  const auto a = run_loso(corpus, config);
  const auto b = run_loso(corpus, config);
  config.jobs = 3;
  const auto c = run_loso(corpus, config);
  CHECK(a.to_csv() == b.to_csv());
  CHECK(a.to_json() == b.to_json());
  CHECK(a.to_csv() == c.to_csv());
  CHECK(a.to_json() == c.to_json());
}

TEST_CASE("aggregation") {
  WerReport col;
  auto score = [](std::string id, Intelligibility level, long errors, long words) {
    SpeakerScore s;
    s.speaker = std::move(id);
    s.level = level;
    s.counts.substitutions = errors;
    s.counts.reference_words = words;
    s.utterances = static_cast<int>(words);
    return s;
  };
  col.speakers = {score("a", Intelligibility::kHigh, 1, 10),
                  score("b", Intelligibility::kHigh, 3, 30),
                  score("c", Intelligibility::kLow, 6, 10)};
  col.aggregate();
  CHECK(col.level_mean.at(Intelligibility::kHigh) == doctest::Approx(10.0));
  CHECK(col.level_weighted.at(Intelligibility::kHigh) == doctest::Approx(10.0));
  CHECK(col.level_mean.at(Intelligibility::kLow) == doctest::Approx(60.0));
  CHECK(col.speaker_mean == doctest::Approx((10.0 + 10.0 + 60.0) / 3.0));
  CHECK(col.utterance_weighted == doctest::Approx(100.0 * 10.0 / 50.0));
  CHECK(col.totals.errors() == 10);
  CHECK(col.utterances == 50);
  CHECK(col.utterance_weighted == col.totals.wer());
}

TEST_CASE("sub-seeds are distinct across stages and speakers") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t stage = 0; stage < 3; ++stage) {
    for (std::uint64_t i = 0; i < 50; ++i) seen.insert(derive_seed(1, stage, i));
  }
  CHECK(seen.size() == 150u);
  CHECK(derive_seed(1, 1, 0) != derive_seed(2, 1, 0));
}

TEST_CASE("harness errors") {
  auto corpus = toy_corpus();
  auto config = toy_config();
  config.jobs = 0;
  CHECK_THROWS_AS(run_loso(corpus, config), ValidationError);

  SynthConfig two;
  two.words = 3;
  two.speakers = 2;
  two.severities = {0.1, 0.2};
  auto small = generate(two);
  small.speakers[1].level = Intelligibility::kControl;
  CHECK_THROWS_AS(run_loso(small, toy_config()), ValidationError);
}
