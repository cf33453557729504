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

#include "pbdsr/ctc.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "pbdsr/error.hpp"

namespace pbdsr {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = a > b ? a : b;
  const double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace

Vector log_sum_exp_rows(const Matrix& m) {
  Vector out(m.rows());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    out[r] = mx + std::log((m.row(r).array() - mx).exp().sum());
  }
  return out;
}

int ctc_min_frames(std::span<const int> target) {
  int n = static_cast<int>(target.size());
  for (std::size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++n;
  }
  return n;
}

CtcResult ctc_loss(const Matrix& logits, std::span<const int> target,
                   int blank_id) {
  const int t_len = static_cast<int>(logits.rows());
  const int vocab = static_cast<int>(logits.cols());
  if (target.empty()) throw ValidationError("CTC target is empty");
  if (blank_id < 0 || blank_id >= vocab) {
    throw ValidationError("blank id outside logit range");
  }
  for (int label : target) {
    if (label == blank_id) throw ValidationError("blank id inside CTC target");
    if (label < 0 || label >= vocab) {
      throw ValidationError("CTC target id " + std::to_string(label) +
                            " outside logit range");
    }
  }
  if (!logits.allFinite()) throw ValidationError("non-finite CTC logits");
  const int min_frames = ctc_min_frames(target);
  if (t_len < min_frames) {
    throw AlignmentInfeasible("CTC needs at least " +
                              std::to_string(min_frames) + " frames, got " +
                              std::to_string(t_len));
  }

  // Extended label sequence: blank, l1, blank, l2, ..., blank.
  const int ext_len = 2 * static_cast<int>(target.size()) + 1;
  std::vector<int> ext(ext_len, blank_id);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];

  const Vector lse = log_sum_exp_rows(logits);
  Matrix log_probs = logits;
  log_probs.colwise() -= lse;

  auto can_skip = [&](int s) {
    return s >= 2 && ext[s] != blank_id && ext[s] != ext[s - 2];
  };

  Matrix alpha = Matrix::Constant(t_len, ext_len, kNegInf);
  alpha(0, 0) = log_probs(0, ext[0]);
  if (ext_len > 1) alpha(0, 1) = log_probs(0, ext[1]);
  for (int t = 1; t < t_len; ++t) {
    for (int s = 0; s < ext_len; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      if (can_skip(s)) acc = log_add(acc, alpha(t - 1, s - 2));
      if (acc != kNegInf) alpha(t, s) = acc + log_probs(t, ext[s]);
    }
  }

  Matrix beta = Matrix::Constant(t_len, ext_len, kNegInf);
  beta(t_len - 1, ext_len - 1) = log_probs(t_len - 1, ext[ext_len - 1]);
  if (ext_len > 1) {
    beta(t_len - 1, ext_len - 2) = log_probs(t_len - 1, ext[ext_len - 2]);
  }
  for (int t = t_len - 2; t >= 0; --t) {
    for (int s = ext_len - 1; s >= 0; --s) {
      double acc = beta(t + 1, s);
      if (s + 1 < ext_len) acc = log_add(acc, beta(t + 1, s + 1));
      if (s + 2 < ext_len && can_skip(s + 2)) {
        acc = log_add(acc, beta(t + 1, s + 2));
      }
      if (acc != kNegInf) beta(t, s) = acc + log_probs(t, ext[s]);
    }
  }

  CtcResult result;
  result.alpha_log_prob =
      log_add(alpha(t_len - 1, ext_len - 1),
              ext_len > 1 ? alpha(t_len - 1, ext_len - 2) : kNegInf);
  result.beta_log_prob =
      log_add(beta(0, 0), ext_len > 1 ? beta(0, 1) : kNegInf);
  const double log_p = result.alpha_log_prob;
  if (log_p == kNegInf) {
    throw AlignmentInfeasible("CTC target has zero probability");
  }
  result.loss = -log_p;

  // d loss / d logit(t,k) = y(t,k) - (1/p) sum_{s: ext[s]=k} alpha*beta/y(t,k)
  result.grad_logits = log_probs.array().exp().matrix();
  for (int t = 0; t < t_len; ++t) {
    std::vector<double> occupancy(vocab, kNegInf);
    for (int s = 0; s < ext_len; ++s) {
      const double ab = alpha(t, s) + beta(t, s);
      if (ab != kNegInf) occupancy[ext[s]] = log_add(occupancy[ext[s]], ab);
    }
    for (int k = 0; k < vocab; ++k) {
      if (occupancy[k] == kNegInf) continue;
      result.grad_logits(t, k) -=
          std::exp(occupancy[k] - log_probs(t, k) - log_p);
    }
  }
  return result;
}

std::vector<int> greedy_decode(const Matrix& logits, int blank_id) {
  std::vector<int> out;
  int prev = -1;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    int best = 0;
    for (Eigen::Index k = 1; k < logits.cols(); ++k) {
      if (logits(t, k) > logits(t, best)) best = static_cast<int>(k);
    }
    if (best != prev && best != blank_id) out.push_back(best);
    prev = best;
  }
  return out;
}

}  // namespace pbdsr
