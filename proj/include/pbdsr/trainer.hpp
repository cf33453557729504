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

#ifndef PBDSR_TRAINER_HPP_
#define PBDSR_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pbdsr/datastore.hpp"
#include "pbdsr/encoder.hpp"
#include "pbdsr/scl.hpp"

namespace pbdsr {

struct TrainConfig {
  bool use_scl = false;
  double tau = kDefaultTemperature;
  double learning_rate = 1e-3;
  int batch_size = 32;
  int max_epochs = 200;
  // Stop once the epoch loss has not beaten its running best by more than
  // min_delta for this many consecutive epochs.
  int patience = 10;
  double min_delta = 1e-9;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<int> hidden_dims = {32, 16};  // body widths after D_in
  bool parallel = true;  // false selects the serial reference batch kernel

  void validate() const;
};

struct TrainHistory {
  // Per-epoch means of batch losses, weighted by usable utterances.
  std::vector<double> loss;
  std::vector<double> ctc;
  std::vector<double> scl;
  int epochs = 0;
  int best_epoch = 0;  // 1-based
  std::string stop_reason;
  long skipped_utterances = 0;  // CTC-infeasible, summed over epochs

  // "epoch,loss,ctc,scl"
  std::string to_csv() const;
};

struct TrainResult {
  EncoderParams params;
  TrainHistory history;
};

/// Objective of one mini-batch: mean over usable utterances of
/// (CTC + per-anchor share of the SCL sum over first-frame embeddings).
struct BatchObjective {
  double loss = 0.0;
  double ctc = 0.0;  // mean CTC
  double scl = 0.0;  // SCL sum / usable count
  int used = 0;
  int skipped = 0;
  EncoderParams grad;
};

BatchObjective batch_objective(const EncoderParams& params,
                               const UtteranceList& batch, int blank_id,
                               bool use_scl, double tau);

namespace reference {
// Straight serial loop; bit-identical to the OpenMP kernel.
BatchObjective batch_objective(const EncoderParams& params,
                               const UtteranceList& batch, int blank_id,
                               bool use_scl, double tau);
}  // namespace reference

struct BatchRecord {
  int epoch = 0;  // 1-based
  const UtteranceList* batch = nullptr;
  const EncoderParams* params_before = nullptr;
  double loss = 0.0;
};
using BatchObserver = std::function<void(const BatchRecord&)>;

TrainResult train(const UtteranceList& split, const Vocabulary& vocab,
                  const TrainConfig& config,
                  const BatchObserver& observer = {});

// Same loop as train(), starting from `params`.
TrainResult fine_tune(const EncoderParams& params, const UtteranceList& support,
                      const Vocabulary& vocab, const TrainConfig& config,
                      const BatchObserver& observer = {});

}  // namespace pbdsr

#endif  // PBDSR_TRAINER_HPP_
