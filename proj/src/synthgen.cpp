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

#include "pbdsr/synthgen.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "pbdsr/error.hpp"
#include "pbdsr/types.hpp"

namespace pbdsr {
namespace {

std::string numbered(char prefix, int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%c%02d", prefix, i);
  return buf;
}

Vector gaussian_vector(std::mt19937_64& rng, int dim, double std_dev) {
  std::normal_distribution<double> dist(0.0, std_dev);
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = dist(rng);
  return v;
}

}  // namespace

void SynthConfig::validate() const {
  if (words < 2) throw ValidationError("synth: words must be >= 2");
  if (speakers < 2) throw ValidationError("synth: speakers must be >= 2");
  if (input_dim < 2) throw ValidationError("synth: input_dim must be >= 2");
  if (reps_per_block < 1) {
    throw ValidationError("synth: reps_per_block must be >= 1");
  }
  if (min_frames < 1 || max_frames < min_frames) {
    throw ValidationError("synth: need 1 <= min_frames <= max_frames");
  }
  if (static_cast<int>(severities.size()) != speakers) {
    throw ValidationError("synth: need one severity per speaker");
  }
  for (double s : severities) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw ValidationError("synth: severities must be finite and >= 0");
    }
  }
  if (!(noise_std >= 0.0)) throw ValidationError("synth: noise_std must be >= 0");
}

Intelligibility level_for_severity(double severity) {
  if (severity < 0.25) return Intelligibility::kHigh;
  if (severity < 0.35) return Intelligibility::kMid;
  if (severity < 0.45) return Intelligibility::kLow;
  return Intelligibility::kVeryLow;
}

Corpus generate(const SynthConfig& config) {
  config.validate();
  const int dim = config.input_dim;
  std::mt19937_64 rng(config.seed);

  std::vector<std::string> words;
  for (int k = 0; k < config.words; ++k) words.push_back(numbered('w', k));
  Corpus corpus;
  corpus.vocabulary = Vocabulary(std::move(words));

  std::vector<Vector> anchors;
  for (int k = 0; k < config.words; ++k) {
    Vector v = gaussian_vector(rng, dim, 1.0);
    anchors.push_back(v / v.norm());
  }

  // Every speaker consumes the same draws whatever its severity, so with a
  // fixed seed sigma only rescales the shift.
  const double unit = 1.0 / std::sqrt(static_cast<double>(dim));
  std::vector<Matrix> transforms;
  std::vector<Vector> offsets;
  for (int s = 0; s < config.speakers; ++s) {
    const double sigma = config.severities[s];
    Matrix g(dim, dim);
    for (int r = 0; r < dim; ++r) g.row(r) = gaussian_vector(rng, dim, unit).transpose();
    transforms.push_back(Matrix::Identity(dim, dim) + sigma * g);
    offsets.push_back(sigma * gaussian_vector(rng, dim, unit));
    corpus.speakers.push_back(
        {numbered('S', s), level_for_severity(sigma)});
  }

  std::uniform_int_distribution<int> frames_dist(config.min_frames,
                                                 config.max_frames);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int s = 0; s < config.speakers; ++s) {
    for (int block = 1; block <= 3; ++block) {
      for (int k = 0; k < config.words; ++k) {
        const Vector clean = transforms[s] * anchors[k] + offsets[s];
        for (int rep = 0; rep < config.reps_per_block; ++rep) {
          FeatureSequence seq;
          seq.speaker_id = corpus.speakers[s].id;
          seq.word_id = k;
          seq.block = block;
          seq.channel = 1;
          seq.utterance_id = seq.speaker_id + "_B" + std::to_string(block) +
                             "_" + corpus.vocabulary.token(k) + "_r" +
                             std::to_string(rep);
          const int t_len = frames_dist(rng);
          seq.frames.resize(t_len, dim);
          for (int t = 0; t < t_len; ++t) {
            for (int d = 0; d < dim; ++d) {
              seq.frames(t, d) = static_cast<float>(
                  clean[d] + config.noise_std * noise(rng));
            }
          }
          corpus.utterances.push_back(std::move(seq));
        }
      }
    }
  }
  corpus.validate();
  return corpus;
}

}  // namespace pbdsr
