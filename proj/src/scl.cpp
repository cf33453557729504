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

#include "pbdsr/scl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "pbdsr/error.hpp"

namespace pbdsr {

SclResult scl_loss(const Matrix& anchors, std::span<const int> labels,
                   double tau) {
  const Eigen::Index n = anchors.rows();
  if (n < 2) throw ValidationError("SCL needs at least 2 anchors");
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw ValidationError("SCL label count does not match anchor count");
  }
  if (!(tau > 0.0)) throw ValidationError("SCL temperature must be positive");
  if (!anchors.allFinite()) throw ValidationError("non-finite SCL anchor");

  const Vector norms = anchors.rowwise().norm();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (norms[i] == 0.0) {
      throw ValidationError("zero-norm SCL anchor at index " +
                            std::to_string(i));
    }
  }
  const Matrix z = norms.cwiseInverse().asDiagonal() * anchors;
  const Matrix sim = (z * z.transpose()) / tau;

  SclResult result;
  // coeff(i, a) = d loss / d sim(i, a)
  Matrix coeff = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    int n_pos = 0;
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a != i && labels[a] == labels[i]) ++n_pos;
    }
    if (n_pos == 0) {
      ++result.skipped;
      continue;
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a != i) mx = std::max(mx, sim(i, a));
    }
    double denom = 0.0;
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a != i) denom += std::exp(sim(i, a) - mx);
    }
    const double log_denom = mx + std::log(denom);
    double pos_sum = 0.0;
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a == i) continue;
      const bool positive = labels[a] == labels[i];
      if (positive) pos_sum += sim(i, a);
      coeff(i, a) = std::exp(sim(i, a) - log_denom) -
                    (positive ? 1.0 / n_pos : 0.0);
    }
    result.loss += log_denom - pos_sum / n_pos;
  }

  // sim(i,a) = z_i.z_a / tau touches both z_i and z_a.
  const Matrix grad_z = (coeff + coeff.transpose()) * z / tau;
  result.grad_anchors.resize(n, anchors.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const RowVector g = grad_z.row(i);
    result.grad_anchors.row(i) = (g - g.dot(z.row(i)) * z.row(i)) / norms[i];
  }
  return result;
}

}  // namespace pbdsr
