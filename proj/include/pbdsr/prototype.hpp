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

#ifndef PBDSR_PROTOTYPE_HPP_
#define PBDSR_PROTOTYPE_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pbdsr/types.hpp"

namespace pbdsr {

/// Per-word mean embeddings, rows sorted by ascending word id.
struct PrototypeSet {
  Matrix prototypes;          // [K_present x D_emb]
  std::vector<int> word_ids;  // row -> word id
  std::vector<int> counts;    // support samples per row

  int size() const { return static_cast<int>(word_ids.size()); }
  int dim() const { return static_cast<int>(prototypes.cols()); }
};

struct Classification {
  int word_id = -1;
  double distance = 0.0;  // squared L2 to the winner
  // Squared-distance gap to the runner-up; +inf with a single prototype.
  double runner_up_margin = 0.0;
};

// Row i of `embeddings` is a support sample of word `word_ids[i]`.
PrototypeSet build_prototypes(const Matrix& embeddings,
                              std::span<const int> word_ids);

double squared_l2(const double* a, const double* b, int dim);

// Nearest prototype under squared L2; ties go to the smallest word id.
Classification classify(std::span<const double> embedding,
                        const PrototypeSet& protos);

// OpenMP over query rows; bit-identical to reference::batch_classify.
std::vector<Classification> batch_classify(const Matrix& embeddings,
                                           const PrototypeSet& protos);

namespace reference {
// Serial one-query-at-a-time scan, kept for testing and benchmarking.
std::vector<Classification> batch_classify(const Matrix& embeddings,
                                           const PrototypeSet& protos);
}  // namespace reference

// CSV: header "word_id,count,e0,...", one row per prototype.
std::string prototypes_to_csv(const PrototypeSet& protos);
PrototypeSet prototypes_from_csv(const std::string& text,
                                 const std::string& context);
void save_prototypes(const PrototypeSet& protos,
                     const std::filesystem::path& path);
PrototypeSet load_prototypes(const std::filesystem::path& path);

}  // namespace pbdsr

#endif  // PBDSR_PROTOTYPE_HPP_
