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

#ifndef PBDSR_ENCODER_HPP_
#define PBDSR_ENCODER_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pbdsr/types.hpp"

namespace pbdsr {

struct DenseLayer {
  Matrix weight;  // [out x in]
  Vector bias;    // [out]

  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }
};

/// Frame-wise MLP body plus a linear CTC head. tanh follows every body layer
/// except the last; the embedding is the last body layer's linear output.
/// Gradients share this type.
struct EncoderParams {
  std::vector<DenseLayer> body;
  DenseLayer head;  // [|V'| x D_emb]

  int input_dim() const { return body.front().in_dim(); }
  int embedding_dim() const { return body.back().out_dim(); }
  int vocab_size() const { return head.out_dim(); }
  std::vector<int> dims() const;

  std::size_t parameter_count() const;
  // Parameters in declaration order: each body layer's weight (row-major)
  // then bias, then the head's weight and bias.
  Vector flatten() const;
  void assign_flat(const Vector& flat);

  // Shape chaining and finiteness; throws ValidationError.
  void validate() const;
  // Same layer shapes, all zero.
  EncoderParams zeros_like() const;
};

struct EmbeddingSequence {
  Matrix embeddings;  // [T x D_emb]
  Matrix logits;      // [T x |V'|]
};

// dims = {D_in, h_1, ..., D_emb}; weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
// biases zero.
EncoderParams init_encoder(std::uint64_t seed, std::span<const int> dims,
                           int vocab_size);

EmbeddingSequence forward(const EncoderParams& params, const Matrix& frames);
EmbeddingSequence forward(const EncoderParams& params,
                          const FrameMatrix& frames);

// Gradient of a scalar loss whose partials w.r.t. the forward outputs are
// grad_embeddings and grad_logits.
EncoderParams backward(const EncoderParams& params, const Matrix& frames,
                       const Matrix& grad_embeddings,
                       const Matrix& grad_logits);

// PBM1: "PBM1", u32 layer-dim count n, n x u32 dims, u32 vocab size, then
// float32 weights in flatten() order, all little-endian.
std::vector<std::uint8_t> encode_checkpoint(const EncoderParams& params);
EncoderParams decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                                const std::string& context);
void save_checkpoint(const EncoderParams& params,
                     const std::filesystem::path& path);
EncoderParams load_checkpoint(const std::filesystem::path& path);

}  // namespace pbdsr

#endif  // PBDSR_ENCODER_HPP_
