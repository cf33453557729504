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

#ifndef PBDSR_SYNTHGEN_HPP_
#define PBDSR_SYNTHGEN_HPP_

#include <cstdint>
#include <vector>

#include "pbdsr/datastore.hpp"

namespace pbdsr {

/// Synthetic speaker-shifted corpus. Word k has an anchor mu_k on the unit
/// sphere; speaker s maps it through A_s = I + sigma_s G_s and adds
/// b_s = sigma_s g_s, then every frame gets N(0, noise_std^2) noise.
struct SynthConfig {
  int words = 20;
  int speakers = 6;
  int reps_per_block = 2;
  int min_frames = 3;
  int max_frames = 8;
  int input_dim = 16;
  // One per speaker; also sets each speaker's intelligibility tag.
  std::vector<double> severities = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  double noise_std = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

// Tier thresholds on sigma: [0, 0.25) high, [0.25, 0.35) mid,
// [0.35, 0.45) low, [0.45, inf) verylow.
Intelligibility level_for_severity(double severity);

// Speakers are named S00, S01, ...; words w00, w01, ...; channel is 1.
Corpus generate(const SynthConfig& config);

}  // namespace pbdsr

#endif  // PBDSR_SYNTHGEN_HPP_
