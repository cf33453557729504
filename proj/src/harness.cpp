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

#include "pbdsr/harness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

#include "json.hpp"

#include "pbdsr/error.hpp"
#include "pbdsr/io.hpp"
#include "pbdsr/prototype.hpp"

namespace pbdsr {
namespace {

constexpr std::uint64_t kStageSeen = 0;
constexpr std::uint64_t kStageHeldOut = 1;
constexpr std::uint64_t kStageFineTune = 2;

struct SpeakerCell {
  SpeakerScore r, r_plus, pb, pb_plus, ft, ft_pb;
  ClusterMetrics cluster_r, cluster_r_plus, cluster_ft;
};

[[noreturn]] void rethrow_with_context(std::exception_ptr error,
                                       const std::string& speaker) {
  const std::string prefix = "held-out speaker " + speaker + ": ";
  try {
    std::rethrow_exception(error);
  } catch (const ValidationError& e) {
    throw ValidationError(prefix + e.what());
  } catch (const IoError& e) {
    throw IoError(prefix + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError(prefix + e.what());
  }
}

UtteranceList of_speaker(const UtteranceList& utts, std::string_view speaker) {
  UtteranceList out;
  for (const auto* u : utts) {
    if (u->speaker_id == speaker) out.push_back(u);
  }
  return out;
}

std::vector<int> labels_of(const UtteranceList& utts) {
  std::vector<int> out;
  out.reserve(utts.size());
  for (const auto* u : utts) out.push_back(u->word_id);
  return out;
}

ClusterMetrics test_clusters(const EncoderParams& params,
                             const UtteranceList& test) {
  return cluster_metrics(first_frame_embeddings(params, test), labels_of(test));
}

SpeakerCell run_held_out(const Corpus& corpus, const HarnessConfig& config,
                         const std::string& speaker, std::size_t index) {
  const auto split = make_loso_split(corpus, speaker, config.support_channel);
  if (split.test.empty()) {
    throw ValidationError("no block-2 test utterances");
  }
  SpeakerCell cell;

  auto base = config.train;
  base.seed = derive_seed(config.seed, kStageHeldOut, index);
  base.use_scl = false;
  const auto r = train(split.train, corpus.vocabulary, base);
  base.use_scl = true;
  const auto r_plus = train(split.train, corpus.vocabulary, base);

  auto ft_config = config.finetune;
  ft_config.seed = derive_seed(config.seed, kStageFineTune, index);
  ft_config.use_scl = false;
  const auto ft = fine_tune(r.params, split.support, corpus.vocabulary, ft_config);

  cell.r = score_greedy(r.params, split.test, corpus, speaker);
  cell.r_plus = score_greedy(r_plus.params, split.test, corpus, speaker);
  cell.pb = score_prototypes(r.params, split.support, split.test, corpus, speaker);
  cell.pb_plus =
      score_prototypes(r_plus.params, split.support, split.test, corpus, speaker);
  cell.ft = score_greedy(ft.params, split.test, corpus, speaker);
  cell.ft_pb =
      score_prototypes(ft.params, split.support, split.test, corpus, speaker);
  cell.cluster_r = test_clusters(r.params, split.test);
  cell.cluster_r_plus = test_clusters(r_plus.params, split.test);
  cell.cluster_ft = test_clusters(ft.params, split.test);
  return cell;
}

nlohmann::json counts_json(const ErrorCounts& c) {
  return {{"substitutions", c.substitutions},
          {"deletions", c.deletions},
          {"insertions", c.insertions},
          {"reference_words", c.reference_words}};
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kV:
      return "V";
    case ModelKind::kVPlus:
      return "V+";
    case ModelKind::kR:
      return "R";
    case ModelKind::kRPlus:
      return "R+";
    case ModelKind::kPbDsr:
      return "PB-DSR";
    case ModelKind::kPbDsrPlus:
      return "PB-DSR+";
    case ModelKind::kFtR:
      return "FT-R";
    case ModelKind::kFtRPbDsr:
      return "FT-R+PB-DSR";
  }
  throw InvariantError("bad ModelKind");
}

HarnessConfig::HarnessConfig() {
  train.learning_rate = 1e-2;
  train.batch_size = 32;
  train.max_epochs = 300;
  train.patience = 30;
  finetune.learning_rate = 1e-2;
  finetune.batch_size = 16;
  finetune.max_epochs = 60;
  finetune.patience = 10;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stage,
                          std::uint64_t index) {
  // splitmix64 finalizer over a fixed per-stage offset.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (1 + stage * 1000 + index);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void WerReport::aggregate() {
  level_mean.clear();
  level_weighted.clear();
  totals = {};
  utterances = 0;
  std::map<Intelligibility, std::pair<double, int>> sums;
  std::map<Intelligibility, ErrorCounts> pooled;
  double wer_sum = 0.0;
  for (const auto& s : speakers) {
    auto& acc = sums[s.level];
    acc.first += s.wer();
    acc.second += 1;
    pooled[s.level] += s.counts;
    wer_sum += s.wer();
    totals += s.counts;
    utterances += s.utterances;
  }
  for (const auto& [level, acc] : sums) level_mean[level] = acc.first / acc.second;
  for (const auto& [level, c] : pooled) level_weighted[level] = c.wer();
  speaker_mean = speakers.empty() ? 0.0 : wer_sum / speakers.size();
  utterance_weighted = totals.wer();
}

const WerReport* LosoReport::column(ModelKind kind) const {
  for (const auto& c : columns) {
    if (c.model == kind) return &c;
  }
  return nullptr;
}

double LosoReport::mean_cluster_ratio(ModelKind kind) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& rec : clusters) {
    if (rec.model == kind) {
      sum += rec.metrics.ratio;
      ++n;
    }
  }
  if (n == 0) throw ValidationError("no cluster records for model");
  return sum / n;
}

SpeakerScore score_greedy(const EncoderParams& params,
                          const UtteranceList& test, const Corpus& corpus,
                          std::string_view speaker) {
  const auto hyps =
      greedy_transcripts(params, test, corpus.vocabulary.blank_id());
  std::vector<std::vector<int>> refs;
  for (const auto* u : test) refs.push_back({u->word_id});
  SpeakerScore score;
  score.speaker = std::string(speaker);
  score.level = corpus.find_speaker(speaker)->level;
  score.counts = word_error_rate(refs, hyps);
  score.utterances = static_cast<int>(test.size());
  return score;
}

SpeakerScore score_prototypes(const EncoderParams& params,
                              const UtteranceList& support,
                              const UtteranceList& test, const Corpus& corpus,
                              std::string_view speaker) {
  const auto support_labels = labels_of(support);
  const auto protos =
      build_prototypes(first_frame_embeddings(params, support), support_labels);
  const auto predictions =
      batch_classify(first_frame_embeddings(params, test), protos);
  std::vector<std::vector<int>> refs, hyps;
  SpeakerScore score;
  for (std::size_t i = 0; i < test.size(); ++i) {
    refs.push_back({test[i]->word_id});
    hyps.push_back({predictions[i].word_id});
    if (std::find(protos.word_ids.begin(), protos.word_ids.end(),
                  test[i]->word_id) == protos.word_ids.end()) {
      ++score.uncovered;
    }
  }
  score.speaker = std::string(speaker);
  score.level = corpus.find_speaker(speaker)->level;
  score.counts = word_error_rate(refs, hyps);
  score.utterances = static_cast<int>(test.size());
  return score;
}

LosoReport run_loso(const Corpus& corpus, const HarnessConfig& config) {
  corpus.validate();
  config.train.validate();
  config.finetune.validate();
  if (config.jobs < 1) throw ValidationError("jobs must be >= 1");
  const auto speakers = corpus.dysarthric_speakers();
  if (speakers.size() < 2) {
    throw ValidationError("LOSO needs at least 2 dysarthric speakers");
  }

  LosoReport report;
  report.seed = config.seed;

  std::vector<SpeakerCell> cells(speakers.size());
  std::vector<std::exception_ptr> errors(speakers.size());
  const auto n = static_cast<std::ptrdiff_t>(speakers.size());
#pragma omp parallel for schedule(dynamic) num_threads(config.jobs)
  for (std::ptrdiff_t j = 0; j < n; ++j) {
    try {
      cells[j] = run_held_out(corpus, config, speakers[j],
                              static_cast<std::size_t>(j));
    } catch (...) {
      errors[j] = std::current_exception();
    }
  }
  for (std::size_t j = 0; j < speakers.size(); ++j) {
    if (errors[j]) rethrow_with_context(errors[j], speakers[j]);
  }

  if (config.include_seen) {
    const auto train_split = make_train_split(corpus);
    const auto seen_test = make_seen_test_split(corpus);
    auto seen_config = config.train;
    seen_config.seed = derive_seed(config.seed, kStageSeen, 0);
    for (bool scl : {false, true}) {
      seen_config.use_scl = scl;
      const auto model = train(train_split, corpus.vocabulary, seen_config);
      WerReport col;
      col.model = scl ? ModelKind::kVPlus : ModelKind::kV;
      for (const auto& spk : speakers) {
        const auto test = of_speaker(seen_test, spk);
        col.speakers.push_back(score_greedy(model.params, test, corpus, spk));
        report.clusters.push_back(
            {col.model, spk, test_clusters(model.params, test)});
      }
      col.aggregate();
      report.columns.push_back(std::move(col));
    }
  }

  const std::array<std::pair<ModelKind, SpeakerScore SpeakerCell::*>, 6> held_out = {{
      {ModelKind::kR, &SpeakerCell::r},
      {ModelKind::kRPlus, &SpeakerCell::r_plus},
      {ModelKind::kPbDsr, &SpeakerCell::pb},
      {ModelKind::kPbDsrPlus, &SpeakerCell::pb_plus},
      {ModelKind::kFtR, &SpeakerCell::ft},
      {ModelKind::kFtRPbDsr, &SpeakerCell::ft_pb},
  }};
  for (const auto& [kind, member] : held_out) {
    WerReport col;
    col.model = kind;
    for (const auto& cell : cells) col.speakers.push_back(cell.*member);
    col.aggregate();
    report.columns.push_back(std::move(col));
  }
  for (std::size_t j = 0; j < speakers.size(); ++j) {
    report.clusters.push_back({ModelKind::kR, speakers[j], cells[j].cluster_r});
    report.clusters.push_back(
        {ModelKind::kRPlus, speakers[j], cells[j].cluster_r_plus});
    report.clusters.push_back({ModelKind::kFtR, speakers[j], cells[j].cluster_ft});
  }
  return report;
}

std::string LosoReport::to_csv() const {
  std::ostringstream out;
  out << "row,level";
  for (const auto& c : columns) out << ',' << model_name(c.model);
  out << '\n';
  if (columns.empty()) return out.str();
  const auto& first = columns.front();
  for (std::size_t s = 0; s < first.speakers.size(); ++s) {
    out << first.speakers[s].speaker << ',' << to_string(first.speakers[s].level);
    for (const auto& c : columns) out << ',' << format_double(c.speakers[s].wer());
    out << '\n';
  }
  for (const auto& [level, unused] : first.level_mean) {
    out << "mean:" << to_string(level) << ',' << to_string(level);
    for (const auto& c : columns) out << ',' << format_double(c.level_mean.at(level));
    out << '\n';
  }
  out << "average,all";
  for (const auto& c : columns) out << ',' << format_double(c.speaker_mean);
  out << "\nweighted,all";
  for (const auto& c : columns) out << ',' << format_double(c.utterance_weighted);
  out << '\n';
  return out.str();
}

std::string LosoReport::to_json() const {
  nlohmann::ordered_json root;
  root["seed"] = seed;
  root["columns"] = nlohmann::ordered_json::array();
  for (const auto& c : columns) {
    nlohmann::ordered_json col;
    col["model"] = std::string(model_name(c.model));
    col["speaker_mean_wer"] = c.speaker_mean;
    col["utterance_weighted_wer"] = c.utterance_weighted;
    col["utterances"] = c.utterances;
    col["totals"] = counts_json(c.totals);
    for (const auto& [level, v] : c.level_mean) {
      col["level_mean_wer"][std::string(to_string(level))] = v;
    }
    for (const auto& [level, v] : c.level_weighted) {
      col["level_weighted_wer"][std::string(to_string(level))] = v;
    }
    col["speakers"] = nlohmann::ordered_json::array();
    for (const auto& s : c.speakers) {
      col["speakers"].push_back({{"speaker", s.speaker},
                                 {"level", std::string(to_string(s.level))},
                                 {"wer", s.wer()},
                                 {"utterances", s.utterances},
                                 {"uncovered", s.uncovered},
                                 {"counts", counts_json(s.counts)}});
    }
    root["columns"].push_back(std::move(col));
  }
  root["clusters"] = nlohmann::ordered_json::array();
  for (const auto& rec : clusters) {
    root["clusters"].push_back({{"model", std::string(model_name(rec.model))},
                                {"speaker", rec.speaker},
                                {"intra", rec.metrics.intra},
                                {"inter", rec.metrics.inter},
                                {"ratio", number_or_null(rec.metrics.ratio)}});
  }
  return root.dump(2) + "\n";
}

}  // namespace pbdsr
