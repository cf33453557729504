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

#include "pbdsr/cli.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pbdsr/datastore.hpp"
#include "pbdsr/encoder.hpp"
#include "pbdsr/error.hpp"
#include "pbdsr/eval.hpp"
#include "pbdsr/harness.hpp"
#include "pbdsr/io.hpp"
#include "pbdsr/prototype.hpp"
#include "pbdsr/synthgen.hpp"
#include "pbdsr/trainer.hpp"

namespace pbdsr {
namespace {

namespace fs = std::filesystem;

struct SelectOptions {
  std::string speaker;  // empty = every dysarthric speaker
  std::string split = "test";
  int channel = 1;
};

void add_train_flags(CLI::App& cmd, TrainConfig& config) {
  cmd.add_option("--lr", config.learning_rate, "Learning rate");
  cmd.add_option("--batch", config.batch_size, "Mini-batch size");
  cmd.add_option("--epochs", config.max_epochs, "Maximum epochs");
  cmd.add_option("--patience", config.patience,
                 "Epochs without improvement before stopping");
  cmd.add_option("--tau", config.tau, "SCL temperature");
  cmd.add_option("--hidden", config.hidden_dims,
                 "Body layer widths after the input dim (last = embedding)");
  cmd.add_option("--beta1", config.beta1, "First-moment decay");
  cmd.add_option("--beta2", config.beta2, "Second-moment decay");
  cmd.add_option("--adam-eps", config.epsilon, "Adam epsilon");
}

void add_select_flags(CLI::App& cmd, SelectOptions& select) {
  cmd.add_option("--speaker", select.speaker,
                 "Restrict to one speaker (default: all dysarthric speakers)");
  cmd.add_option("--split", select.split, "Utterances to use")
      ->check(CLI::IsMember({"test", "support", "all"}));
  cmd.add_option("--channel", select.channel, "Support-set channel");
}

// test: block 2; support: blocks 1 and 3 on the support channel; all: both.
UtteranceList select_utterances(const Corpus& corpus,
                                const SelectOptions& select) {
  if (!select.speaker.empty() && !corpus.find_speaker(select.speaker)) {
    throw ValidationError("unknown speaker: " + select.speaker);
  }
  UtteranceList out;
  for (const auto& u : corpus.utterances) {
    const auto* spk = corpus.find_speaker(u.speaker_id);
    if (select.speaker.empty() ? spk->level == Intelligibility::kControl
                               : u.speaker_id != select.speaker) {
      continue;
    }
    const bool is_test = u.block == 2;
    const bool is_support = u.block != 2 && u.channel == select.channel;
    if ((select.split == "test" && is_test) ||
        (select.split == "support" && is_support) ||
        (select.split == "all" && (is_test || is_support))) {
      out.push_back(&u);
    }
  }
  if (out.empty()) {
    throw ValidationError("no utterances match the " + select.split +
                          " selection");
  }
  return out;
}

std::string wer_json(const WerReport& report, std::string_view source) {
  nlohmann::ordered_json root;
  root["source"] = std::string(source);
  root["speaker_mean_wer"] = report.speaker_mean;
  root["utterance_weighted_wer"] = report.utterance_weighted;
  root["utterances"] = report.utterances;
  root["substitutions"] = report.totals.substitutions;
  root["deletions"] = report.totals.deletions;
  root["insertions"] = report.totals.insertions;
  for (const auto& [level, v] : report.level_mean) {
    root["level_mean_wer"][std::string(to_string(level))] = v;
  }
  root["speakers"] = nlohmann::ordered_json::array();
  for (const auto& s : report.speakers) {
    root["speakers"].push_back({{"speaker", s.speaker},
                                {"level", std::string(to_string(s.level))},
                                {"wer", s.wer()},
                                {"utterances", s.utterances},
                                {"substitutions", s.counts.substitutions},
                                {"deletions", s.counts.deletions},
                                {"insertions", s.counts.insertions}});
  }
  return root.dump(2) + "\n";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

// Reads classify output into utterance_id -> predicted word.
std::map<std::string, std::string> read_predictions(const fs::path& path) {
  std::istringstream in(read_file_text(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("utterance_id,", 0) != 0) {
    throw ValidationError("missing predictions header in " + path.string());
  }
  std::map<std::string, std::string> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() < 2) {
      throw ValidationError("short predictions row in " + path.string());
    }
    out[cells[0]] = cells[1];
  }
  return out;
}

WerReport score_by_speaker(
    const Corpus& corpus, const UtteranceList& utts,
    const std::vector<std::vector<int>>& hyps) {
  std::map<std::string, std::pair<std::vector<std::vector<int>>,
                                  std::vector<std::vector<int>>>> by_speaker;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    auto& [refs, hs] = by_speaker[utts[i]->speaker_id];
    refs.push_back({utts[i]->word_id});
    hs.push_back(hyps[i]);
  }
  WerReport report;
  for (const auto& spk : corpus.speakers) {
    auto it = by_speaker.find(spk.id);
    if (it == by_speaker.end()) continue;
    SpeakerScore score;
    score.speaker = spk.id;
    score.level = spk.level;
    score.counts = word_error_rate(it->second.first, it->second.second);
    score.utterances = static_cast<int>(it->second.first.size());
    report.speakers.push_back(score);
  }
  report.aggregate();
  return report;
}

int cmd_synth(const SynthConfig& config, const fs::path& out) {
  const auto corpus = generate(config);
  const auto manifest = write_corpus(corpus, out);
  std::cout << "wrote " << corpus.utterances.size() << " utterances to "
            << manifest.string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Prototype-based recognition of unseen-speaker isolated words"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file supplying flag values");

  std::uint64_t seed = 1;

  // synth
  SynthConfig synth_config;
  fs::path synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", seed, "Random seed");
  synth->add_option("--words", synth_config.words, "Vocabulary size K");
  synth->add_option("--speakers", synth_config.speakers, "Speaker count S");
  synth->add_option("--reps", synth_config.reps_per_block,
                    "Repetitions per word per block");
  synth->add_option("--min-frames", synth_config.min_frames, "Minimum T");
  synth->add_option("--max-frames", synth_config.max_frames, "Maximum T");
  synth->add_option("--dim", synth_config.input_dim, "Input dimension");
  synth->add_option("--noise", synth_config.noise_std, "Per-frame noise std");
  synth->add_option("--severities", synth_config.severities,
                    "Per-speaker shift magnitudes");

  // train
  TrainConfig train_config = HarnessConfig().train;
  fs::path manifest, checkpoint, out_path, history_path, protos_path,
      predictions_path;
  std::string hold_out;
  auto* train_cmd = app.add_subcommand("train", "Train an encoder");
  train_cmd->add_option("--manifest", manifest, "Corpus manifest")->required();
  train_cmd->add_option("--out", out_path, "Checkpoint to write")->required();
  train_cmd->add_option("--history", history_path, "Training history CSV");
  train_cmd->add_option("--hold-out", hold_out,
                        "Exclude this speaker (leave-one-speaker-out split)");
  train_cmd->add_flag("--scl", train_config.use_scl,
                      "Add the supervised contrastive term");
  train_cmd->add_option("--seed", seed, "Random seed");
  add_train_flags(*train_cmd, train_config);

  // finetune
  TrainConfig ft_config = HarnessConfig().finetune;
  SelectOptions ft_select;
  auto* ft_cmd = app.add_subcommand("finetune",
                                    "Adapt a checkpoint on a speaker's support set");
  ft_cmd->add_option("--manifest", manifest, "Corpus manifest")->required();
  ft_cmd->add_option("--ckpt", checkpoint, "Input checkpoint")->required();
  ft_cmd->add_option("--speaker", ft_select.speaker, "Target speaker")->required();
  ft_cmd->add_option("--channel", ft_select.channel, "Support-set channel");
  ft_cmd->add_option("--out", out_path, "Checkpoint to write")->required();
  ft_cmd->add_option("--history", history_path, "Training history CSV");
  ft_cmd->add_option("--seed", seed, "Random seed");
  add_train_flags(*ft_cmd, ft_config);

  // protos
  SelectOptions proto_select;
  proto_select.split = "support";
  auto* protos_cmd =
      app.add_subcommand("protos", "Build per-word prototypes from a support set");
  protos_cmd->add_option("--manifest", manifest, "Corpus manifest")->required();
  protos_cmd->add_option("--ckpt", checkpoint, "Encoder checkpoint")->required();
  protos_cmd->add_option("--out", out_path, "Prototype CSV to write")->required();
  add_select_flags(*protos_cmd, proto_select);

  // classify
  SelectOptions classify_select;
  auto* classify_cmd =
      app.add_subcommand("classify", "Nearest-prototype classification");
  classify_cmd->add_option("--manifest", manifest, "Corpus manifest")->required();
  classify_cmd->add_option("--ckpt", checkpoint, "Encoder checkpoint")->required();
  classify_cmd->add_option("--protos", protos_path, "Prototype CSV")->required();
  classify_cmd->add_option("--out", out_path, "Predictions CSV to write")
      ->required();
  add_select_flags(*classify_cmd, classify_select);

  // eval
  SelectOptions eval_select;
  auto* eval_cmd = app.add_subcommand(
      "eval", "Word error rate of predictions or of greedy CTC decoding");
  eval_cmd->add_option("--manifest", manifest, "Corpus manifest")->required();
  auto* eval_pred = eval_cmd->add_option("--predictions", predictions_path,
                                         "Predictions CSV from classify");
  auto* eval_ckpt = eval_cmd->add_option("--ckpt", checkpoint,
                                         "Checkpoint for greedy decoding");
  eval_pred->excludes(eval_ckpt);
  eval_cmd->add_option("--out", out_path, "Report JSON to write")->required();
  add_select_flags(*eval_cmd, eval_select);

  // loso
  HarnessConfig harness;
  fs::path loso_out;
  bool no_seen = false;
  auto* loso_cmd =
      app.add_subcommand("loso", "Run the leave-one-speaker-out matrix");
  loso_cmd->add_option("--manifest", manifest, "Corpus manifest")->required();
  loso_cmd->add_option("--out-dir", loso_out,
                       "Directory for loso.csv and loso.json")
      ->required();
  loso_cmd->add_option("--seed", seed, "Random seed");
  loso_cmd->add_option("--jobs", harness.jobs,
                       "Held-out speakers trained in parallel");
  loso_cmd->add_option("--channel", harness.support_channel,
                       "Support-set channel");
  loso_cmd->add_flag("--no-seen", no_seen, "Skip the V / V+ models");
  add_train_flags(*loso_cmd, harness.train);
  loso_cmd->add_option("--ft-lr", harness.finetune.learning_rate,
                       "Fine-tuning learning rate");
  loso_cmd->add_option("--ft-epochs", harness.finetune.max_epochs,
                       "Fine-tuning maximum epochs");
  loso_cmd->add_option("--ft-batch", harness.finetune.batch_size,
                       "Fine-tuning mini-batch size");

  // export-emb
  SelectOptions export_select;
  auto* export_cmd = app.add_subcommand(
      "export-emb", "Write first-frame embeddings as CSV");
  export_cmd->add_option("--manifest", manifest, "Corpus manifest")->required();
  export_cmd->add_option("--ckpt", checkpoint, "Encoder checkpoint")->required();
  export_cmd->add_option("--out", out_path, "Embedding CSV to write")->required();
  add_select_flags(*export_cmd, export_select);

  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e);
      return kExitOk;
    }
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*synth) {
      synth_config.seed = seed;
      return cmd_synth(synth_config, synth_out);
    }
    const auto corpus = load_corpus(manifest);
    if (*train_cmd) {
      train_config.seed = seed;
      if (!hold_out.empty() && !corpus.find_speaker(hold_out)) {
        throw ValidationError("unknown held-out speaker: " + hold_out);
      }
      UtteranceList split;
      for (const auto* u : make_train_split(corpus)) {
        if (u->speaker_id != hold_out) split.push_back(u);
      }
      const auto result = train(split, corpus.vocabulary, train_config);
      save_checkpoint(result.params, out_path);
      if (!history_path.empty()) {
        write_file_atomic(history_path, result.history.to_csv());
      }
      std::cout << "trained " << result.history.epochs << " epochs ("
                << result.history.stop_reason << "), best epoch "
                << result.history.best_epoch << "\n";
    } else if (*ft_cmd) {
      ft_config.seed = seed;
      const auto params = load_checkpoint(checkpoint);
      const auto split =
          make_loso_split(corpus, ft_select.speaker, ft_select.channel);
      const auto result =
          fine_tune(params, split.support, corpus.vocabulary, ft_config);
      save_checkpoint(result.params, out_path);
      if (!history_path.empty()) {
        write_file_atomic(history_path, result.history.to_csv());
      }
      std::cout << "fine-tuned " << result.history.epochs << " epochs\n";
    } else if (*protos_cmd) {
      const auto params = load_checkpoint(checkpoint);
      const auto support = select_utterances(corpus, proto_select);
      std::vector<int> labels;
      for (const auto* u : support) labels.push_back(u->word_id);
      const auto protos =
          build_prototypes(first_frame_embeddings(params, support), labels);
      save_prototypes(protos, out_path);
      std::cout << "built " << protos.size() << " prototypes from "
                << support.size() << " utterances\n";
    } else if (*classify_cmd) {
      const auto params = load_checkpoint(checkpoint);
      const auto protos = load_prototypes(protos_path);
      for (int w : protos.word_ids) {
        if (!corpus.vocabulary.is_word(w)) {
          throw ValidationError("prototype word id " + std::to_string(w) +
                                " outside the vocabulary");
        }
      }
      const auto utts = select_utterances(corpus, classify_select);
      const auto predictions =
          batch_classify(first_frame_embeddings(params, utts), protos);
      std::ostringstream csv;
      csv << "utterance_id,predicted,distance,margin\n";
      for (std::size_t i = 0; i < utts.size(); ++i) {
        csv << utts[i]->utterance_id << ','
            << corpus.vocabulary.token(predictions[i].word_id) << ','
            << format_double(predictions[i].distance) << ','
            << format_double(predictions[i].runner_up_margin) << '\n';
      }
      write_file_atomic(out_path, csv.str());
      std::cout << "classified " << utts.size() << " utterances\n";
    } else if (*eval_cmd) {
      const auto utts = select_utterances(corpus, eval_select);
      std::vector<std::vector<int>> hyps;
      std::string source;
      if (!predictions_path.empty()) {
        source = "predictions";
        const auto preds = read_predictions(predictions_path);
        for (const auto* u : utts) {
          auto it = preds.find(u->utterance_id);
          if (it == preds.end()) {
            throw ValidationError("no prediction for utterance " +
                                  u->utterance_id);
          }
          hyps.push_back({corpus.vocabulary.lookup(it->second)});
        }
      } else if (!checkpoint.empty()) {
        source = "greedy";
        hyps = greedy_transcripts(load_checkpoint(checkpoint), utts,
                                  corpus.vocabulary.blank_id());
      } else {
        throw ValidationError("eval needs --predictions or --ckpt");
      }
      const auto report = score_by_speaker(corpus, utts, hyps);
      write_file_atomic(out_path, wer_json(report, source));
      std::cout << "WER " << format_double(report.utterance_weighted) << "% over "
                << report.utterances << " utterances\n";
    } else if (*loso_cmd) {
      harness.seed = seed;
      harness.include_seen = !no_seen;
      const auto report = run_loso(corpus, harness);
      write_file_atomic(loso_out / "loso.csv", report.to_csv());
      write_file_atomic(loso_out / "loso.json", report.to_json());
      std::cout << report.to_csv();
    } else if (*export_cmd) {
      const auto params = load_checkpoint(checkpoint);
      const auto utts = select_utterances(corpus, export_select);
      write_file_atomic(out_path,
                        embeddings_to_csv(utts, first_frame_embeddings(params, utts),
                                          corpus.vocabulary));
      std::cout << "exported " << utts.size() << " embeddings\n";
    }
  } catch (const IoError& e) {
    std::cerr << "pbdsr: I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "pbdsr: validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "pbdsr: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace pbdsr
