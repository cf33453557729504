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

#ifndef PBDSR_EVAL_HPP_
#define PBDSR_EVAL_HPP_

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "pbdsr/datastore.hpp"
#include "pbdsr/encoder.hpp"
#include "pbdsr/error.hpp"
#include "pbdsr/types.hpp"

namespace pbdsr {

struct ErrorCounts {
  long substitutions = 0;
  long deletions = 0;
  long insertions = 0;
  long reference_words = 0;

  long errors() const { return substitutions + deletions + insertions; }
  // Percent; may exceed 100 with insertions.
  double wer() const {
    return reference_words == 0
               ? 0.0
               : 100.0 * static_cast<double>(errors()) /
                     static_cast<double>(reference_words);
  }
  ErrorCounts& operator+=(const ErrorCounts& o) {
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    reference_words += o.reference_words;
    return *this;
  }
  bool operator==(const ErrorCounts&) const = default;
};

/// Levenshtein alignment of one pair. On equal cost the backtrace prefers
/// match/substitution, then deletion, then insertion.
template <typename Token>
ErrorCounts align_counts(std::span<const Token> ref, std::span<const Token> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<long> cost((n + 1) * (m + 1));
  auto at = [m](std::size_t i, std::size_t j) { return i * (m + 1) + j; };
  for (std::size_t i = 0; i <= n; ++i) cost[at(i, 0)] = static_cast<long>(i);
  for (std::size_t j = 0; j <= m; ++j) cost[at(0, j)] = static_cast<long>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const long diag = cost[at(i - 1, j - 1)] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cost[at(i, j)] =
          std::min({diag, cost[at(i - 1, j)] + 1, cost[at(i, j - 1)] + 1});
    }
  }
  ErrorCounts counts;
  counts.reference_words = static_cast<long>(n);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (cost[at(i, j)] == cost[at(i - 1, j - 1)] + (same ? 0 : 1)) {
        if (!same) ++counts.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && cost[at(i, j)] == cost[at(i - 1, j)] + 1) {
      ++counts.deletions;
      --i;
    } else {
      ++counts.insertions;
      --j;
    }
  }
  return counts;
}

/// Corpus-level counts summed over pairs. Throws ValidationError on a length
/// mismatch or an empty reference.
template <typename Token>
ErrorCounts word_error_rate(const std::vector<std::vector<Token>>& refs,
                            const std::vector<std::vector<Token>>& hyps) {
  if (refs.size() != hyps.size()) {
    throw ValidationError("reference and hypothesis counts differ");
  }
  ErrorCounts total;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    if (refs[k].empty()) {
      throw ValidationError("empty reference at index " + std::to_string(k));
    }
    total += align_counts<Token>(refs[k], hyps[k]);
  }
  return total;
}

struct ClusterMetrics {
  double intra = 0.0;  // mean over classes of mean member-to-centroid sq. dist
  double inter = 0.0;  // mean pairwise sq. dist between class centroids
  double ratio = 0.0;  // intra / inter
  int classes = 0;
};

// Needs >= 2 distinct labels; ValidationError otherwise.
ClusterMetrics cluster_metrics(const Matrix& embeddings,
                               std::span<const int> labels);

// Row i = embedding of frame 0 of utterance i. OpenMP over utterances.
Matrix first_frame_embeddings(const EncoderParams& params,
                              const UtteranceList& utterances);

// Greedy CTC transcript per utterance. OpenMP over utterances.
std::vector<std::vector<int>> greedy_transcripts(const EncoderParams& params,
                                                 const UtteranceList& utterances,
                                                 int blank_id);

// CSV "utterance_id,label,e0,...": label is the word string.
std::string embeddings_to_csv(const UtteranceList& utterances,
                              const Matrix& embeddings,
                              const Vocabulary& vocab);

}  // namespace pbdsr

#endif  // PBDSR_EVAL_HPP_
