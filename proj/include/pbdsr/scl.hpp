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

#ifndef PBDSR_SCL_HPP_
#define PBDSR_SCL_HPP_

#include <span>

#include "pbdsr/types.hpp"

namespace pbdsr {

inline constexpr double kDefaultTemperature = 0.07;

struct SclResult {
  double loss = 0.0;
  Matrix grad_anchors;  // [N x D], w.r.t. the unnormalized anchors
  int skipped = 0;      // anchors without any positive
};

/// Supervised contrastive loss, summed over anchors:
///
///   sum_{i : P(i) nonempty} -1/|P(i)| sum_{p in P(i)}
///       log( exp(z_i.z_p / tau) / sum_{a != i} exp(z_i.z_a / tau) )
///
/// with z = x / |x|. P(i) holds the other indices sharing i's label.
/// Throws ValidationError for N < 2, tau <= 0, a label count mismatch,
/// non-finite anchors or any zero-norm anchor.
SclResult scl_loss(const Matrix& anchors, std::span<const int> labels,
                   double tau = kDefaultTemperature);

}  // namespace pbdsr

#endif  // PBDSR_SCL_HPP_
