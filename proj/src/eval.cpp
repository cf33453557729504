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

#include "pbdsr/eval.hpp"

#include <limits>
#include <map>
#include <sstream>

#include "pbdsr/ctc.hpp"
#include "pbdsr/io.hpp"

namespace pbdsr {

ClusterMetrics cluster_metrics(const Matrix& embeddings,
                               std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != embeddings.rows()) {
    throw ValidationError("cluster labels do not match embedding rows");
  }
  if (embeddings.rows() < 2) {
    throw ValidationError("cluster metrics need at least 2 samples");
  }
  std::map<int, std::vector<Eigen::Index>> members;
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    members[labels[i]].push_back(i);
  }
  if (members.size() < 2) {
    throw ValidationError("cluster metrics need at least 2 classes");
  }

  Matrix centroids(static_cast<Eigen::Index>(members.size()), embeddings.cols());
  ClusterMetrics out;
  out.classes = static_cast<int>(members.size());
  Eigen::Index c = 0;
  for (const auto& [label, rows] : members) {
    RowVector centroid = RowVector::Zero(embeddings.cols());
    for (auto r : rows) centroid += embeddings.row(r);
    centroid /= static_cast<double>(rows.size());
    double spread = 0.0;
    for (auto r : rows) spread += (embeddings.row(r) - centroid).squaredNorm();
    out.intra += spread / static_cast<double>(rows.size());
    centroids.row(c++) = centroid;
  }
  out.intra /= static_cast<double>(members.size());

  double pair_sum = 0.0;
  long pairs = 0;
  for (Eigen::Index a = 0; a < centroids.rows(); ++a) {
    for (Eigen::Index b = a + 1; b < centroids.rows(); ++b) {
      pair_sum += (centroids.row(a) - centroids.row(b)).squaredNorm();
      ++pairs;
    }
  }
  out.inter = pair_sum / static_cast<double>(pairs);
  out.ratio = out.inter > 0.0 ? out.intra / out.inter
                              : std::numeric_limits<double>::infinity();
  return out;
}

Matrix first_frame_embeddings(const EncoderParams& params,
                              const UtteranceList& utterances) {
  const auto n = static_cast<std::ptrdiff_t>(utterances.size());
  Matrix out(n, params.embedding_dim());
  for (const auto* u : utterances) {
    if (u->dim() != params.input_dim()) {
      throw ValidationError("utterance " + u->utterance_id +
                            " frame dim does not match the encoder");
    }
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Matrix first = utterances[i]->frames.topRows(1).cast<double>();
    out.row(i) = forward(params, first).embeddings.row(0);
  }
  return out;
}

std::vector<std::vector<int>> greedy_transcripts(const EncoderParams& params,
                                                 const UtteranceList& utterances,
                                                 int blank_id) {
  const auto n = static_cast<std::ptrdiff_t>(utterances.size());
  for (const auto* u : utterances) {
    if (u->dim() != params.input_dim()) {
      throw ValidationError("utterance " + u->utterance_id +
                            " frame dim does not match the encoder");
    }
  }
  std::vector<std::vector<int>> out(utterances.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[i] = greedy_decode(forward(params, utterances[i]->frames).logits,
                           blank_id);
  }
  return out;
}

std::string embeddings_to_csv(const UtteranceList& utterances,
                              const Matrix& embeddings,
                              const Vocabulary& vocab) {
  std::ostringstream out;
  out << "utterance_id,label";
  for (Eigen::Index d = 0; d < embeddings.cols(); ++d) out << ",e" << d;
  out << '\n';
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    out << utterances[i]->utterance_id << ','
        << vocab.token(utterances[i]->word_id);
    for (Eigen::Index d = 0; d < embeddings.cols(); ++d) {
      out << ',' << format_double(embeddings(static_cast<Eigen::Index>(i), d));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace pbdsr
