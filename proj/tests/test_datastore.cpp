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

#include <algorithm>
#include <bit>
#include <cstring>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include "doctest.h"
#include "pbdsr/datastore.hpp"
#include "pbdsr/error.hpp"
#include "pbdsr/io.hpp"
#include "pbdsr/synthgen.hpp"
#include "test_util.hpp"

using namespace pbdsr;
using testutil::TempDir;

namespace {

FeatureSequence make_seq(const std::string& id, const std::string& speaker,
                         int word, int block, int channel, float value) {
  FeatureSequence seq;
  seq.utterance_id = id;
  seq.speaker_id = speaker;
  seq.word_id = word;
  seq.block = block;
  seq.channel = channel;
  seq.frames = FrameMatrix::Constant(2, 3, value);
  return seq;
}

// Held-out speaker "A" with two channel-1 utterances per block, plus "B".
Corpus small_corpus() {
  Corpus c;
  c.vocabulary = Vocabulary({"yes", "no"});
  c.speakers = {{"A", Intelligibility::kMid}, {"B", Intelligibility::kLow}};
  int n = 0;
  for (const std::string spk : {"A", "B"}) {
    for (int block = 1; block <= 3; ++block) {
      for (int word = 0; word < 2; ++word) {
        c.utterances.push_back(make_seq(spk + std::to_string(n++), spk, word,
                                        block, 1, static_cast<float>(n)));
      }
    }
  }
  return c;
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p) << s;
}

}  // namespace

TEST_CASE("PBF1 layout for a 1x2 matrix is 20 bytes") {
  FrameMatrix frames(1, 2);
  frames << 0.0f, 1.0f;
  const auto bytes = encode_feature_file(frames);
  REQUIRE(bytes.size() == 20);
  const std::vector<std::uint8_t> header = {'P', 'B', 'F', '1', 1, 0, 0, 0,
                                            2,   0,   0,   0};
  CHECK(std::equal(header.begin(), header.end(), bytes.begin()));
  // 0.0f then 1.0f (0x3f800000) little-endian
  const std::vector<std::uint8_t> body = {0, 0, 0, 0, 0x00, 0x00, 0x80, 0x3f};
  CHECK(std::equal(body.begin(), body.end(), bytes.begin() + 12));
}

TEST_CASE("PBF1 round trip is bit-exact for random finite matrices") {
  TempDir dir("pbf");
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint32_t> bits;
  for (int trial = 0; trial < 25; ++trial) {
    FeatureSequence seq;
    const int rows = 1 + trial % 9;
    const int cols = 1 + (trial * 7) % 13;
    seq.frames.resize(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        float v;
        do {
          v = std::bit_cast<float>(bits(rng));
        } while (!std::isfinite(v));
        seq.frames(r, c) = v;
      }
    }
    const auto path = dir / ("f" + std::to_string(trial) + ".pbf");
    write_feature_file(seq, path);
    const auto back = read_feature_file(path);
    REQUIRE(back.rows() == rows);
    REQUIRE(back.cols() == cols);
    CHECK(std::memcmp(back.data(), seq.frames.data(), sizeof(float) * rows * cols) == 0);
  }
}

TEST_CASE("PBF1 rejects non-finite values and bad files") {
  TempDir dir("pbfbad");
  FeatureSequence seq;
  seq.frames = FrameMatrix::Zero(2, 2);
  seq.frames(1, 0) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(write_feature_file(seq, dir / "nan.pbf"), ValidationError);
  CHECK_FALSE(std::filesystem::exists(dir / "nan.pbf"));

  seq.frames(1, 0) = 0.0f;
  write_text(dir / "blocker", "x");
  CHECK_THROWS_AS(write_feature_file(seq, dir / "blocker" / "f.pbf"), IoError);

  write_text(dir / "junk.pbf", "PBF1\x01");
  CHECK_THROWS_AS(read_feature_file(dir / "junk.pbf"), ValidationError);
  CHECK_THROWS_AS(read_feature_file(dir / "absent.pbf"), IoError);
}

TEST_CASE("Vocabulary ids and specials") {
  Vocabulary v({"alpha", "bravo", "charlie"});
  CHECK(v.word_count() == 3);
  CHECK(v.size() == 8);
  CHECK(v.blank_id() == 3);
  for (int id = 0; id < v.word_count(); ++id) CHECK(v.lookup(v.token(id)) == id);
  CHECK(v.token(v.blank_id()) == "<blank>");
  CHECK(v.token(v.unk_id()) == "<unk>");
  CHECK_FALSE(v.is_word(v.blank_id()));
  CHECK_THROWS_AS(Vocabulary({"a", "a"}), ValidationError);
  CHECK_THROWS_AS(Vocabulary({"<pad>"}), ValidationError);
}

TEST_CASE("load_corpus reads a hand-written manifest") {
  TempDir dir("manifest");
  FeatureSequence seq;
  seq.frames = FrameMatrix::Ones(2, 4);
  std::filesystem::create_directories(dir / "f");
  for (int i = 0; i < 3; ++i) {
    write_feature_file(seq, dir / ("f/u" + std::to_string(i) + ".pbf"));
  }
  const std::string head =
      "# test\nvocab\tup\tdown\nspeaker\tM01\tverylow\nspeaker\tC01\tcontrol\n";
  write_text(dir / "m.tsv", head +
                                "utt\tu0\tM01\tup\t1\t5\tf/u0.pbf\n"
                                "utt\tu1\tM01\tdown\t2\t5\tf/u1.pbf\n"
                                "utt\tu2\tC01\tup\t3\t2\tf/u2.pbf\n");
  const auto corpus = load_corpus(dir / "m.tsv");
  CHECK(corpus.utterances.size() == 3);
  CHECK(corpus.vocabulary.word_count() == 2);
  CHECK(corpus.utterances[1].word_id == 1);
  CHECK(corpus.utterances[1].channel == 5);
  CHECK(corpus.dysarthric_speakers() == std::vector<std::string>{"M01"});

  SUBCASE("unknown word is named") {
    write_text(dir / "bad.tsv", head + "utt\tu0\tM01\tzzz\t1\t5\tf/u0.pbf\n");
    try {
      load_corpus(dir / "bad.tsv");
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("zzz") != std::string::npos);
    }
  }
  SUBCASE("missing feature file is named") {
    write_text(dir / "bad.tsv", head + "utt\tu0\tM01\tup\t1\t5\tf/nope.pbf\n");
    try {
      load_corpus(dir / "bad.tsv");
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("nope.pbf") != std::string::npos);
    }
  }
  SUBCASE("duplicate utterance id") {
    write_text(dir / "bad.tsv", head +
                                    "utt\tu0\tM01\tup\t1\t5\tf/u0.pbf\n"
                                    "utt\tu0\tM01\tup\t1\t5\tf/u1.pbf\n");
    CHECK_THROWS_AS(load_corpus(dir / "bad.tsv"), ValidationError);
  }
  SUBCASE("missing manifest") {
    CHECK_THROWS_AS(load_corpus(dir / "none.tsv"), IoError);
  }
}

TEST_CASE("synthetic corpus survives write/load with expected counts") {
  TempDir dir("synthio");
  SynthConfig config;
  config.reps_per_block = 1;
  const auto corpus = generate(config);
  const auto manifest = write_corpus(corpus, dir.path());
  const auto loaded = load_corpus(manifest);
  CHECK(loaded.utterances.size() == 20u * 6u * 3u);
  CHECK(loaded.vocabulary == corpus.vocabulary);
  CHECK(loaded.speakers == corpus.speakers);
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    CHECK(loaded.utterances[i].utterance_id == corpus.utterances[i].utterance_id);
    CHECK(loaded.utterances[i].frames == corpus.utterances[i].frames);
  }
  const auto again = load_corpus(manifest);
  for (std::size_t i = 0; i < again.utterances.size(); ++i) {
    CHECK(again.utterances[i].frames == loaded.utterances[i].frames);
  }
}

TEST_CASE("make_loso_split filters by block and channel") {
  const auto corpus = small_corpus();
  const auto split = make_loso_split(corpus, "A", 1);
  CHECK(split.support.size() == 4);
  CHECK(split.test.size() == 2);
  for (const auto* u : split.train) CHECK(u->speaker_id != "A");
  for (const auto* u : split.train) CHECK(u->block != 2);
  CHECK_THROWS_AS(make_loso_split(corpus, "A", 99), ValidationError);
  CHECK_THROWS_AS(make_loso_split(corpus, "nobody", 1), ValidationError);
}

TEST_CASE("control speakers stay in train and cannot be held out") {
  auto corpus = small_corpus();
  corpus.speakers.push_back({"C", Intelligibility::kControl});
  corpus.utterances.push_back(make_seq("c_b2", "C", 0, 2, 1, 0.5f));
  const auto split = make_loso_split(corpus, "A", 1);
  CHECK(std::any_of(split.train.begin(), split.train.end(),
                    [](const auto* u) { return u->utterance_id == "c_b2"; }));
  CHECK_THROWS_AS(make_loso_split(corpus, "C", 1), ValidationError);
  const auto seen_test = make_seen_test_split(corpus);
  for (const auto* u : seen_test) CHECK(u->speaker_id != "C");
}

TEST_CASE("LOSO splits over the synthetic corpus: sizes and no leakage") {
  SynthConfig config;
  config.reps_per_block = 1;
  const auto corpus = generate(config);
  const int k = config.words;
  for (const auto& speaker : corpus.dysarthric_speakers()) {
    const auto split = make_loso_split(corpus, speaker, 1);
    CHECK(split.support.size() == static_cast<std::size_t>(2 * k));
    CHECK(split.test.size() == static_cast<std::size_t>(k));
    std::set<std::string> train_ids, support_ids, test_ids;
    for (const auto* u : split.train) {
      CHECK(u->speaker_id != speaker);
      train_ids.insert(u->utterance_id);
    }
    for (const auto* u : split.support) {
      CHECK(u->speaker_id == speaker);
      CHECK(u->block != 2);
      CHECK(u->channel == 1);
      support_ids.insert(u->utterance_id);
    }
    for (const auto* u : split.test) {
      CHECK(u->speaker_id == speaker);
      CHECK(u->block == 2);
      test_ids.insert(u->utterance_id);
    }
    for (const auto& id : support_ids) {
      CHECK_FALSE(test_ids.contains(id));
      CHECK_FALSE(train_ids.contains(id));
    }
    for (const auto& id : test_ids) CHECK_FALSE(train_ids.contains(id));
  }
}

TEST_CASE("atomic writes leave no temp file behind") {
  TempDir dir("atomic");
  write_file_atomic(dir / "out.txt", std::string("hello"));
  CHECK(read_file_text(dir / "out.txt") == "hello");
  CHECK_FALSE(std::filesystem::exists(dir / "out.txt.tmp"));
}
