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

#ifndef PBDSR_DATASTORE_HPP_
#define PBDSR_DATASTORE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pbdsr/types.hpp"

namespace pbdsr {

/// One utterance: its frame matrix plus identity labels. Ids, block and
/// channel live in the manifest; only the frames go to the PBF1 file.
struct FeatureSequence {
  std::string utterance_id;
  std::string speaker_id;
  int word_id = 0;
  int block = 1;
  int channel = 1;
  FrameMatrix frames;  // [T x D_in]

  int num_frames() const { return static_cast<int>(frames.rows()); }
  int dim() const { return static_cast<int>(frames.cols()); }
};

/// Word <-> id map. Words take ids 0..K-1; the five special tokens follow in
/// the order blank, <s>, <pad>, </s>, <unk>.
class Vocabulary {
 public:
  static constexpr int kNumSpecials = 5;

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> words);

  int word_count() const { return static_cast<int>(words_.size()); }
  int size() const { return word_count() + kNumSpecials; }

  int blank_id() const { return word_count(); }
  int bos_id() const { return word_count() + 1; }
  int pad_id() const { return word_count() + 2; }
  int eos_id() const { return word_count() + 3; }
  int unk_id() const { return word_count() + 4; }

  bool is_word(int id) const { return id >= 0 && id < word_count(); }

  // Throws ValidationError naming the word when absent.
  int lookup(std::string_view word) const;
  std::optional<int> find(std::string_view word) const;

  // Word string or special-token spelling ("<blank>", "<s>", ...).
  const std::string& token(int id) const;

  const std::vector<std::string>& words() const { return words_; }

  bool operator==(const Vocabulary& other) const {
    return words_ == other.words_;
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

enum class Intelligibility { kHigh, kMid, kLow, kVeryLow, kControl };

std::string_view to_string(Intelligibility level);
Intelligibility parse_intelligibility(std::string_view tag);

struct SpeakerInfo {
  std::string id;
  Intelligibility level = Intelligibility::kHigh;

  bool operator==(const SpeakerInfo&) const = default;
};

struct Corpus {
  Vocabulary vocabulary;
  std::vector<FeatureSequence> utterances;
  std::vector<SpeakerInfo> speakers;  // header order

  const SpeakerInfo* find_speaker(std::string_view id) const;
  // Speakers not tagged "control", in header order.
  std::vector<std::string> dysarthric_speakers() const;
  // Checks every Corpus/FeatureSequence invariant; throws ValidationError.
  void validate() const;
};

using UtteranceList = std::vector<const FeatureSequence*>;

struct LosoSplit {
  std::string held_out_speaker;
  UtteranceList train;
  UtteranceList support;
  UtteranceList test;
};

// PBF1: "PBF1", u32 T, u32 D_in, then T*D_in float32, all little-endian,
// row-major.
void write_feature_file(const FeatureSequence& seq,
                        const std::filesystem::path& path);
FrameMatrix read_feature_file(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_feature_file(const FrameMatrix& frames);
FrameMatrix decode_feature_file(const std::vector<std::uint8_t>& bytes,
                                const std::string& context);

/// Manifest grammar, one tab-separated record per line; '#' starts a comment:
///   vocab    <word> <word> ...
///   speaker  <speaker_id> <high|mid|low|verylow|control>
///   utt      <utterance_id> <speaker_id> <word> <block> <channel> <path>
/// The vocab record and every speaker record precede the first utt record.
/// Relative feature paths resolve against the manifest's directory.
Corpus load_corpus(const std::filesystem::path& manifest_path);

// Writes <dir>/manifest.tsv and <dir>/feats/<utterance_id>.pbf.
std::filesystem::path write_corpus(const Corpus& corpus,
                                   const std::filesystem::path& dir);

// Training split for the seen-speaker models: control speakers in full plus
// blocks 1 and 3 of every dysarthric speaker.
UtteranceList make_train_split(const Corpus& corpus);
// Block 2 of every dysarthric speaker.
UtteranceList make_seen_test_split(const Corpus& corpus);

LosoSplit make_loso_split(const Corpus& corpus, std::string_view held_out,
                          int support_channel);

}  // namespace pbdsr

#endif  // PBDSR_DATASTORE_HPP_
