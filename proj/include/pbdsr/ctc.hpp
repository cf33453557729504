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

#ifndef PBDSR_CTC_HPP_
#define PBDSR_CTC_HPP_

#include <span>
#include <vector>

#include "pbdsr/types.hpp"

namespace pbdsr {

struct CtcResult {
  double loss = 0.0;  // -log p(target | logits)
  Matrix grad_logits;  // d loss / d logits, [T x |V'|]
  // log p from the alpha and beta recursions; equal up to rounding.
  double alpha_log_prob = 0.0;
  double beta_log_prob = 0.0;
};

// Smallest T that admits an alignment: |target| plus one blank between each
// pair of equal adjacent labels.
int ctc_min_frames(std::span<const int> target);

// Forward-backward in log space over the blank-interleaved target. Throws
// AlignmentInfeasible when T < ctc_min_frames(target) and ValidationError for
// an empty target, a blank inside it, or an out-of-range id.
CtcResult ctc_loss(const Matrix& logits, std::span<const int> target,
                   int blank_id);

// Per-frame argmax (ties to the smallest id), collapse repeats, drop blanks.
std::vector<int> greedy_decode(const Matrix& logits, int blank_id);

// log(sum(exp(row))) per row.
Vector log_sum_exp_rows(const Matrix& m);

}  // namespace pbdsr

#endif  // PBDSR_CTC_HPP_
