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

#include "pbdsr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "pbdsr/ctc.hpp"
#include "pbdsr/error.hpp"
#include "pbdsr/io.hpp"

namespace pbdsr {
namespace {

struct UtteranceState {
  bool usable = false;
  double ctc = 0.0;
  Matrix frames;
  Matrix embeddings;
  Matrix grad_logits;
};

void forward_one(const EncoderParams& params, const FeatureSequence& utt,
                 int blank_id, UtteranceState& state) {
  state.frames = utt.frames.cast<double>();
  auto out = forward(params, state.frames);
  const int target[] = {utt.word_id};
  try {
    auto ctc = ctc_loss(out.logits, target, blank_id);
    state.usable = true;
    state.ctc = ctc.loss;
    state.grad_logits = std::move(ctc.grad_logits);
    state.embeddings = std::move(out.embeddings);
  } catch (const AlignmentInfeasible&) {
    state.usable = false;
  }
}

// SCL over the usable utterances' first frames; fills per-utterance first-row
// embedding gradients (already scaled by 1/used).
double scl_phase(std::vector<UtteranceState>& states, const UtteranceList& batch,
                 int used, double tau, std::vector<RowVector>& first_grads) {
  first_grads.assign(states.size(), RowVector());
  if (used < 2) return 0.0;
  Matrix anchors(used, states.front().embeddings.cols());
  std::vector<int> labels;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!states[i].usable) continue;
    anchors.row(static_cast<Eigen::Index>(labels.size())) =
        states[i].embeddings.row(0);
    labels.push_back(batch[i]->word_id);
    owner.push_back(i);
  }
  const auto scl = scl_loss(anchors, labels, tau);
  for (std::size_t j = 0; j < owner.size(); ++j) {
    first_grads[owner[j]] =
        scl.grad_anchors.row(static_cast<Eigen::Index>(j)) / used;
  }
  return scl.loss;
}

Vector backward_one(const EncoderParams& params, const UtteranceState& state,
                    const RowVector& first_grad, int used) {
  Matrix grad_emb = Matrix::Zero(state.embeddings.rows(),
                                 state.embeddings.cols());
  if (first_grad.size() > 0) grad_emb.row(0) = first_grad;
  const Matrix grad_logits = state.grad_logits / used;
  return backward(params, state.frames, grad_emb, grad_logits).flatten();
}

BatchObjective finish(const EncoderParams& params, double ctc_sum,
                      double scl_sum, int used, int skipped,
                      const Vector& flat_grad) {
  BatchObjective obj;
  obj.used = used;
  obj.skipped = skipped;
  obj.grad = params.zeros_like();
  if (used == 0) return obj;
  obj.ctc = ctc_sum / used;
  obj.scl = scl_sum / used;
  obj.loss = obj.ctc + obj.scl;
  obj.grad.assign_flat(flat_grad);
  return obj;
}

void adam_step(Vector& theta, const Vector& grad, Vector& m, Vector& v,
               long step, const TrainConfig& config) {
  m = config.beta1 * m + (1.0 - config.beta1) * grad;
  v = config.beta2 * v + (1.0 - config.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    theta[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

TrainResult run_loop(EncoderParams params, const UtteranceList& split,
                     const Vocabulary& vocab, const TrainConfig& config,
                     const BatchObserver& observer) {
  config.validate();
  if (split.empty()) throw ValidationError("empty training split");
  for (const auto* u : split) {
    if (!vocab.is_word(u->word_id)) {
      throw ValidationError("utterance " + u->utterance_id +
                            " has a word id outside the vocabulary");
    }
  }
  if (params.vocab_size() != vocab.size()) {
    throw ValidationError("encoder head size does not match vocabulary");
  }

  const int blank = vocab.blank_id();
  std::mt19937_64 rng(config.seed ^ 0x5eed5eed5eed5eedull);
  std::vector<std::size_t> order(split.size());
  std::iota(order.begin(), order.end(), 0);

  Vector theta = params.flatten();
  Vector m = Vector::Zero(theta.size());
  Vector v = Vector::Zero(theta.size());
  long step = 0;

  TrainResult result{params, {}};
  auto& hist = result.history;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  hist.stop_reason = "max_epochs";

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0, ctc_sum = 0.0, scl_sum = 0.0;
    long n_used = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      UtteranceList batch;
      for (std::size_t i = start; i < stop; ++i) batch.push_back(split[order[i]]);

      const auto obj =
          config.parallel
              ? batch_objective(params, batch, blank, config.use_scl, config.tau)
              : reference::batch_objective(params, batch, blank, config.use_scl,
                                           config.tau);
      if (observer) observer({epoch, &batch, &params, obj.loss});
      hist.skipped_utterances += obj.skipped;
      if (obj.used == 0) continue;
      loss_sum += obj.loss * obj.used;
      ctc_sum += obj.ctc * obj.used;
      scl_sum += obj.scl * obj.used;
      n_used += obj.used;

      ++step;
      adam_step(theta, obj.grad.flatten(), m, v, step, config);
      params.assign_flat(theta);
    }
    if (n_used == 0) {
      throw ValidationError("no utterance in the split admits a CTC alignment");
    }
    const double epoch_loss = loss_sum / static_cast<double>(n_used);
    hist.loss.push_back(epoch_loss);
    hist.ctc.push_back(ctc_sum / static_cast<double>(n_used));
    hist.scl.push_back(scl_sum / static_cast<double>(n_used));
    hist.epochs = epoch;
    if (!std::isfinite(epoch_loss)) {
      throw InvariantError("training loss diverged at epoch " +
                           std::to_string(epoch));
    }
    if (epoch_loss < best - config.min_delta) {
      best = epoch_loss;
      hist.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      hist.stop_reason = "early_stop";
      break;
    }
  }
  return result;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(tau > 0.0)) throw ValidationError("tau must be positive");
  if (!(learning_rate >= 0.0)) {
    throw ValidationError("learning_rate must be non-negative");
  }
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (use_scl && batch_size < 2) {
    throw ValidationError("batch_size must be >= 2 when SCL is enabled");
  }
  if (max_epochs < 1) throw ValidationError("max_epochs must be >= 1");
  if (patience < 1) throw ValidationError("patience must be >= 1");
  if (hidden_dims.empty()) throw ValidationError("hidden_dims is empty");
}

std::string TrainHistory::to_csv() const {
  std::ostringstream out;
  out << "epoch,loss,ctc,scl\n";
  for (int e = 0; e < epochs; ++e) {
    out << (e + 1) << ',' << format_double(loss[e]) << ','
        << format_double(ctc[e]) << ',' << format_double(scl[e]) << '\n';
  }
  return out.str();
}

BatchObjective batch_objective(const EncoderParams& params,
                               const UtteranceList& batch, int blank_id,
                               bool use_scl, double tau) {
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
  std::vector<UtteranceState> states(batch.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    forward_one(params, *batch[i], blank_id, states[i]);
  }

  int used = 0;
  double ctc_sum = 0.0;
  for (const auto& s : states) {
    if (!s.usable) continue;
    ++used;
    ctc_sum += s.ctc;
  }
  const int skipped = static_cast<int>(batch.size()) - used;
  if (used == 0) return finish(params, 0.0, 0.0, 0, skipped, Vector());

  std::vector<RowVector> first_grads;
  const double scl_sum =
      use_scl ? scl_phase(states, batch, used, tau, first_grads) : 0.0;
  if (!use_scl) first_grads.assign(states.size(), RowVector());

  std::vector<Vector> grads(batch.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (states[i].usable) {
      grads[i] = backward_one(params, states[i], first_grads[i], used);
    }
  }
  // Fixed index-order reduction keeps results independent of thread count.
  Vector total = Vector::Zero(static_cast<Eigen::Index>(params.parameter_count()));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (states[i].usable) total += grads[i];
  }
  return finish(params, ctc_sum, scl_sum, used, skipped, total);
}

namespace reference {

BatchObjective batch_objective(const EncoderParams& params,
                               const UtteranceList& batch, int blank_id,
                               bool use_scl, double tau) {
  std::vector<UtteranceState> states(batch.size());
  int used = 0;
  double ctc_sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    forward_one(params, *batch[i], blank_id, states[i]);
    if (states[i].usable) {
      ++used;
      ctc_sum += states[i].ctc;
    }
  }
  const int skipped = static_cast<int>(batch.size()) - used;
  if (used == 0) return finish(params, 0.0, 0.0, 0, skipped, Vector());

  std::vector<RowVector> first_grads(states.size());
  double scl_sum = 0.0;
  if (use_scl) scl_sum = scl_phase(states, batch, used, tau, first_grads);

  Vector total = Vector::Zero(static_cast<Eigen::Index>(params.parameter_count()));
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].usable) total += backward_one(params, states[i], first_grads[i], used);
  }
  return finish(params, ctc_sum, scl_sum, used, skipped, total);
}

}  // namespace reference

TrainResult train(const UtteranceList& split, const Vocabulary& vocab,
                  const TrainConfig& config, const BatchObserver& observer) {
  config.validate();
  if (split.empty()) throw ValidationError("empty training split");
  std::vector<int> dims{split.front()->dim()};
  dims.insert(dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
  auto params = init_encoder(config.seed, dims, vocab.size());
  return run_loop(std::move(params), split, vocab, config, observer);
}

TrainResult fine_tune(const EncoderParams& params, const UtteranceList& support,
                      const Vocabulary& vocab, const TrainConfig& config,
                      const BatchObserver& observer) {
  params.validate();
  if (support.empty()) throw ValidationError("empty fine-tuning support set");
  return run_loop(params, support, vocab, config, observer);
}

}  // namespace pbdsr
