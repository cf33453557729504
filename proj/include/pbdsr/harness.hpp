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

#ifndef PBDSR_HARNESS_HPP_
#define PBDSR_HARNESS_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pbdsr/datastore.hpp"
#include "pbdsr/eval.hpp"
#include "pbdsr/trainer.hpp"

namespace pbdsr {

// Result columns, in report order.
enum class ModelKind { kV, kVPlus, kR, kRPlus, kPbDsr, kPbDsrPlus, kFtR, kFtRPbDsr };
inline constexpr std::array<ModelKind, 8> kAllModels = {
    ModelKind::kV,     ModelKind::kVPlus,     ModelKind::kR,   ModelKind::kRPlus,
    ModelKind::kPbDsr, ModelKind::kPbDsrPlus, ModelKind::kFtR, ModelKind::kFtRPbDsr};
std::string_view model_name(ModelKind kind);

struct HarnessConfig {
  TrainConfig train;     // V/R; use_scl is set per variant
  TrainConfig finetune;  // FT-R, CTC only
  int support_channel = 1;
  std::uint64_t seed = 1;
  int jobs = 1;
  bool include_seen = true;  // train and score V / V+

  HarnessConfig();
};

// Stage sub-seeds derived from the run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stage,
                          std::uint64_t index);

struct SpeakerScore {
  std::string speaker;
  Intelligibility level = Intelligibility::kHigh;
  ErrorCounts counts;
  int utterances = 0;
  // Test utterances whose word has no prototype (prototype cells only).
  int uncovered = 0;

  double wer() const { return counts.wer(); }
};

/// One column of the matrix.
struct WerReport {
  ModelKind model = ModelKind::kR;
  std::vector<SpeakerScore> speakers;
  std::map<Intelligibility, double> level_mean;      // mean of speaker WERs
  std::map<Intelligibility, double> level_weighted;  // from pooled counts
  double speaker_mean = 0.0;
  double utterance_weighted = 0.0;
  ErrorCounts totals;
  int utterances = 0;

  // Fills the aggregate fields from `speakers`.
  void aggregate();
};

struct ClusterRecord {
  ModelKind model = ModelKind::kR;
  std::string speaker;
  ClusterMetrics metrics;
};

struct LosoReport {
  std::uint64_t seed = 0;
  std::vector<WerReport> columns;  // kAllModels order, V/V+ only if seen
  std::vector<ClusterRecord> clusters;

  const WerReport* column(ModelKind kind) const;
  // Mean ratio over the records of one model.
  double mean_cluster_ratio(ModelKind kind) const;

  std::string to_csv() const;
  std::string to_json() const;
};

LosoReport run_loso(const Corpus& corpus, const HarnessConfig& config);

// Greedy-decode scoring of one speaker's utterances.
SpeakerScore score_greedy(const EncoderParams& params,
                          const UtteranceList& test, const Corpus& corpus,
                          std::string_view speaker);
// Nearest-prototype scoring; prototypes come from `support` under `params`.
SpeakerScore score_prototypes(const EncoderParams& params,
                              const UtteranceList& support,
                              const UtteranceList& test, const Corpus& corpus,
                              std::string_view speaker);

}  // namespace pbdsr

#endif  // PBDSR_HARNESS_HPP_
