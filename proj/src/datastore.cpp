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

#include "pbdsr/datastore.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "pbdsr/error.hpp"
#include "pbdsr/io.hpp"

namespace pbdsr {
namespace {

constexpr std::array<char, 4> kPbfMagic = {'P', 'B', 'F', '1'};
constexpr std::size_t kPbfHeaderBytes = 12;

const std::array<std::string, Vocabulary::kNumSpecials> kSpecialSpellings = {
    "<blank>", "<s>", "<pad>", "</s>", "<unk>"};

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    fields.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return fields;
}

int parse_int(const std::string& text, const std::string& what,
              std::size_t line_no) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(),
                                   value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError("manifest line " + std::to_string(line_no) +
                          ": bad " + what + " '" + text + "'");
  }
  return value;
}

void check_finite(const FrameMatrix& frames, const std::string& context) {
  if (!frames.allFinite()) {
    throw ValidationError("non-finite frame value in " + context);
  }
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> words)
    : words_(std::move(words)) {
  for (int i = 0; i < word_count(); ++i) {
    const auto& w = words_[i];
    if (w.empty()) throw ValidationError("empty vocabulary word");
    if (std::find(kSpecialSpellings.begin(), kSpecialSpellings.end(), w) !=
        kSpecialSpellings.end()) {
      throw ValidationError("vocabulary word collides with special token: " +
                            w);
    }
    if (!index_.emplace(w, i).second) {
      throw ValidationError("duplicate vocabulary word: " + w);
    }
  }
}

std::optional<int> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::lookup(std::string_view word) const {
  if (auto id = find(word)) return *id;
  throw ValidationError("unknown word: " + std::string(word));
}

const std::string& Vocabulary::token(int id) const {
  if (is_word(id)) return words_[id];
  const int special = id - word_count();
  if (special >= 0 && special < kNumSpecials) return kSpecialSpellings[special];
  throw ValidationError("token id out of range: " + std::to_string(id));
}

std::string_view to_string(Intelligibility level) {
  switch (level) {
    case Intelligibility::kHigh:
      return "high";
    case Intelligibility::kMid:
      return "mid";
    case Intelligibility::kLow:
      return "low";
    case Intelligibility::kVeryLow:
      return "verylow";
    case Intelligibility::kControl:
      return "control";
  }
  throw InvariantError("bad Intelligibility");
}

Intelligibility parse_intelligibility(std::string_view tag) {
  if (tag == "high") return Intelligibility::kHigh;
  if (tag == "mid") return Intelligibility::kMid;
  if (tag == "low") return Intelligibility::kLow;
  if (tag == "verylow") return Intelligibility::kVeryLow;
  if (tag == "control") return Intelligibility::kControl;
  throw ValidationError("unknown intelligibility tag: " + std::string(tag));
}

const SpeakerInfo* Corpus::find_speaker(std::string_view id) const {
  for (const auto& s : speakers) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

std::vector<std::string> Corpus::dysarthric_speakers() const {
  std::vector<std::string> out;
  for (const auto& s : speakers) {
    if (s.level != Intelligibility::kControl) out.push_back(s.id);
  }
  return out;
}

void Corpus::validate() const {
  std::unordered_set<std::string> speaker_ids;
  for (const auto& s : speakers) {
    if (!speaker_ids.insert(s.id).second) {
      throw ValidationError("duplicate speaker: " + s.id);
    }
  }
  std::unordered_set<std::string> utt_ids;
  for (const auto& u : utterances) {
    if (!utt_ids.insert(u.utterance_id).second) {
      throw ValidationError("duplicate utterance_id: " + u.utterance_id);
    }
    if (!speaker_ids.contains(u.speaker_id)) {
      throw ValidationError("utterance " + u.utterance_id +
                            " has undeclared speaker " + u.speaker_id);
    }
    if (!vocabulary.is_word(u.word_id)) {
      throw ValidationError("utterance " + u.utterance_id +
                            " has invalid word id");
    }
    if (u.block < 1 || u.block > 3) {
      throw ValidationError("utterance " + u.utterance_id +
                            " has block outside {1,2,3}");
    }
    if (u.channel < 1) {
      throw ValidationError("utterance " + u.utterance_id +
                            " has channel < 1");
    }
    if (u.frames.rows() < 1 || u.frames.cols() < 1) {
      throw ValidationError("utterance " + u.utterance_id +
                            " has an empty frame matrix");
    }
    check_finite(u.frames, "utterance " + u.utterance_id);
  }
}

std::vector<std::uint8_t> encode_feature_file(const FrameMatrix& frames) {
  check_finite(frames, "feature matrix");
  if (frames.rows() < 1 || frames.cols() < 1) {
    throw ValidationError("feature matrix must be at least 1x1");
  }
  std::vector<std::uint8_t> bytes;
  bytes.reserve(kPbfHeaderBytes + 4 * frames.size());
  bytes.insert(bytes.end(), kPbfMagic.begin(), kPbfMagic.end());
  put_u32(bytes, static_cast<std::uint32_t>(frames.rows()));
  put_u32(bytes, static_cast<std::uint32_t>(frames.cols()));
  for (Eigen::Index t = 0; t < frames.rows(); ++t) {
    for (Eigen::Index d = 0; d < frames.cols(); ++d) {
      put_f32(bytes, frames(t, d));
    }
  }
  return bytes;
}

FrameMatrix decode_feature_file(const std::vector<std::uint8_t>& bytes,
                                const std::string& context) {
  if (bytes.size() < kPbfHeaderBytes ||
      !std::equal(kPbfMagic.begin(), kPbfMagic.end(), bytes.begin())) {
    throw ValidationError("not a PBF1 file: " + context);
  }
  const std::uint32_t rows = get_u32(bytes, 4);
  const std::uint32_t cols = get_u32(bytes, 8);
  if (rows == 0 || cols == 0) {
    throw ValidationError("PBF1 file has zero dimension: " + context);
  }
  const std::uint64_t expected =
      kPbfHeaderBytes + 4ull * static_cast<std::uint64_t>(rows) * cols;
  if (bytes.size() != expected) {
    throw ValidationError("PBF1 size mismatch: " + context);
  }
  FrameMatrix frames(rows, cols);
  std::size_t offset = kPbfHeaderBytes;
  for (std::uint32_t t = 0; t < rows; ++t) {
    for (std::uint32_t d = 0; d < cols; ++d) {
      frames(t, d) = get_f32(bytes, offset);
      offset += 4;
    }
  }
  check_finite(frames, context);
  return frames;
}

void write_feature_file(const FeatureSequence& seq,
                        const std::filesystem::path& path) {
  write_file_atomic(path, encode_feature_file(seq.frames));
}

FrameMatrix read_feature_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw IoError("missing feature file: " + path.string());
  }
  return decode_feature_file(read_file_bytes(path), path.string());
}

Corpus load_corpus(const std::filesystem::path& manifest_path) {
  if (!std::filesystem::exists(manifest_path)) {
    throw IoError("missing manifest: " + manifest_path.string());
  }
  std::istringstream in(read_file_text(manifest_path));
  const auto base = manifest_path.parent_path();

  Corpus corpus;
  bool have_vocab = false;
  std::unordered_set<std::string> utt_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_tabs(line);
    const auto& kind = fields[0];
    const auto where = "manifest line " + std::to_string(line_no);
    if (kind == "vocab") {
      if (have_vocab) throw ValidationError(where + ": second vocab record");
      if (!corpus.utterances.empty()) {
        throw ValidationError(where + ": vocab record after utterances");
      }
      corpus.vocabulary =
          Vocabulary(std::vector<std::string>(fields.begin() + 1, fields.end()));
      have_vocab = true;
    } else if (kind == "speaker") {
      if (fields.size() != 3) {
        throw ValidationError(where + ": speaker record needs 2 fields");
      }
      if (!corpus.utterances.empty()) {
        throw ValidationError(where + ": speaker record after utterances");
      }
      if (corpus.find_speaker(fields[1])) {
        throw ValidationError(where + ": duplicate speaker " + fields[1]);
      }
      corpus.speakers.push_back({fields[1], parse_intelligibility(fields[2])});
    } else if (kind == "utt") {
      if (!have_vocab) {
        throw ValidationError(where + ": utterance before vocab record");
      }
      if (fields.size() != 7) {
        throw ValidationError(where + ": utt record needs 6 fields");
      }
      FeatureSequence seq;
      seq.utterance_id = fields[1];
      seq.speaker_id = fields[2];
      if (!utt_ids.insert(seq.utterance_id).second) {
        throw ValidationError(where + ": duplicate utterance_id " +
                              seq.utterance_id);
      }
      if (!corpus.find_speaker(seq.speaker_id)) {
        throw ValidationError(where + ": undeclared speaker " +
                              seq.speaker_id);
      }
      auto word = corpus.vocabulary.find(fields[3]);
      if (!word) {
        throw ValidationError(where + ": unknown word '" + fields[3] + "'");
      }
      seq.word_id = *word;
      seq.block = parse_int(fields[4], "block", line_no);
      seq.channel = parse_int(fields[5], "channel", line_no);
      std::filesystem::path feat_path = fields[6];
      if (feat_path.is_relative()) feat_path = base / feat_path;
      seq.frames = read_feature_file(feat_path);
      corpus.utterances.push_back(std::move(seq));
    } else {
      throw ValidationError(where + ": unknown record kind '" + kind + "'");
    }
  }
  if (!have_vocab) throw ValidationError("manifest has no vocab record");
  corpus.validate();
  return corpus;
}

std::filesystem::path write_corpus(const Corpus& corpus,
                                   const std::filesystem::path& dir) {
  corpus.validate();
  std::ostringstream out;
  out << "# pbdsr manifest v1\nvocab";
  for (const auto& w : corpus.vocabulary.words()) out << '\t' << w;
  out << '\n';
  for (const auto& s : corpus.speakers) {
    out << "speaker\t" << s.id << '\t' << to_string(s.level) << '\n';
  }
  for (const auto& u : corpus.utterances) {
    const auto rel = std::filesystem::path("feats") / (u.utterance_id + ".pbf");
    write_feature_file(u, dir / rel);
    out << "utt\t" << u.utterance_id << '\t' << u.speaker_id << '\t'
        << corpus.vocabulary.token(u.word_id) << '\t' << u.block << '\t'
        << u.channel << '\t' << rel.generic_string() << '\n';
  }
  const auto manifest = dir / "manifest.tsv";
  write_file_atomic(manifest, out.str());
  return manifest;
}

UtteranceList make_train_split(const Corpus& corpus) {
  UtteranceList out;
  for (const auto& u : corpus.utterances) {
    const auto* spk = corpus.find_speaker(u.speaker_id);
    if (spk->level == Intelligibility::kControl || u.block != 2) {
      out.push_back(&u);
    }
  }
  return out;
}

UtteranceList make_seen_test_split(const Corpus& corpus) {
  UtteranceList out;
  for (const auto& u : corpus.utterances) {
    const auto* spk = corpus.find_speaker(u.speaker_id);
    if (spk->level != Intelligibility::kControl && u.block == 2) {
      out.push_back(&u);
    }
  }
  return out;
}

LosoSplit make_loso_split(const Corpus& corpus, std::string_view held_out,
                          int support_channel) {
  const auto* spk = corpus.find_speaker(held_out);
  if (!spk) {
    throw ValidationError("unknown held-out speaker: " + std::string(held_out));
  }
  if (spk->level == Intelligibility::kControl) {
    throw ValidationError("control speaker cannot be held out: " +
                          std::string(held_out));
  }
  LosoSplit split;
  split.held_out_speaker = std::string(held_out);
  for (const auto& u : corpus.utterances) {
    if (u.speaker_id == held_out) {
      if (u.block == 2) {
        split.test.push_back(&u);
      } else if (u.channel == support_channel) {
        split.support.push_back(&u);
      }
      continue;
    }
    const auto* other = corpus.find_speaker(u.speaker_id);
    if (other->level == Intelligibility::kControl || u.block != 2) {
      split.train.push_back(&u);
    }
  }
  if (split.support.empty()) {
    throw ValidationError("empty support set for speaker " +
                          std::string(held_out) + " on channel " +
                          std::to_string(support_channel));
  }
  return split;
}

}  // namespace pbdsr
