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

#include "pbdsr/encoder.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

#include "pbdsr/error.hpp"
#include "pbdsr/io.hpp"

namespace pbdsr {
namespace {

constexpr std::array<char, 4> kPbmMagic = {'P', 'B', 'M', '1'};

DenseLayer init_layer(std::mt19937_64& rng, int in, int out) {
  const double limit = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-limit, limit);
  DenseLayer layer{Matrix(out, in), Vector::Zero(out)};
  for (int r = 0; r < out; ++r) {
    for (int c = 0; c < in; ++c) layer.weight(r, c) = dist(rng);
  }
  return layer;
}

void apply_affine(const DenseLayer& layer, const Matrix& in, Matrix& out) {
  out.noalias() = in * layer.weight.transpose();
  out.rowwise() += layer.bias.transpose();
}

// Activations of every body layer: acts[0] = input, acts[l+1] = output of
// layer l after its nonlinearity (identity for the last body layer).
std::vector<Matrix> body_activations(const EncoderParams& params,
                                     const Matrix& frames) {
  if (frames.cols() != params.input_dim()) {
    throw ValidationError("frame dim " + std::to_string(frames.cols()) +
                          " does not match encoder input dim " +
                          std::to_string(params.input_dim()));
  }
  std::vector<Matrix> acts;
  acts.reserve(params.body.size() + 1);
  acts.push_back(frames);
  for (std::size_t l = 0; l < params.body.size(); ++l) {
    Matrix next;
    apply_affine(params.body[l], acts.back(), next);
    if (l + 1 < params.body.size()) next = next.array().tanh().matrix();
    acts.push_back(std::move(next));
  }
  return acts;
}

}  // namespace

std::vector<int> EncoderParams::dims() const {
  std::vector<int> out{input_dim()};
  for (const auto& layer : body) out.push_back(layer.out_dim());
  return out;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = head.weight.size() + head.bias.size();
  for (const auto& layer : body) n += layer.weight.size() + layer.bias.size();
  return n;
}

Vector EncoderParams::flatten() const {
  Vector flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index at = 0;
  auto put = [&](const DenseLayer& layer) {
    flat.segment(at, layer.weight.size()) =
        Eigen::Map<const Vector>(layer.weight.data(), layer.weight.size());
    at += layer.weight.size();
    flat.segment(at, layer.bias.size()) = layer.bias;
    at += layer.bias.size();
  };
  for (const auto& layer : body) put(layer);
  put(head);
  return flat;
}

void EncoderParams::assign_flat(const Vector& flat) {
  if (flat.size() != static_cast<Eigen::Index>(parameter_count())) {
    throw ValidationError("flat parameter vector has wrong length");
  }
  Eigen::Index at = 0;
  auto take = [&](DenseLayer& layer) {
    Eigen::Map<Vector>(layer.weight.data(), layer.weight.size()) =
        flat.segment(at, layer.weight.size());
    at += layer.weight.size();
    layer.bias = flat.segment(at, layer.bias.size());
    at += layer.bias.size();
  };
  for (auto& layer : body) take(layer);
  take(head);
}

void EncoderParams::validate() const {
  if (body.empty()) throw ValidationError("encoder has no body layers");
  for (std::size_t l = 0; l < body.size(); ++l) {
    const auto& layer = body[l];
    if (layer.bias.size() != layer.weight.rows()) {
      throw ValidationError("body layer " + std::to_string(l) +
                            " bias size mismatch");
    }
    if (l > 0 && layer.in_dim() != body[l - 1].out_dim()) {
      throw ValidationError("body layer " + std::to_string(l) +
                            " does not chain with the previous layer");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw ValidationError("non-finite parameter in body layer " +
                            std::to_string(l));
    }
  }
  if (head.in_dim() != embedding_dim() || head.bias.size() != head.out_dim()) {
    throw ValidationError("head shape does not match embedding dim");
  }
  if (!head.weight.allFinite() || !head.bias.allFinite()) {
    throw ValidationError("non-finite parameter in head");
  }
}

EncoderParams EncoderParams::zeros_like() const {
  EncoderParams z;
  for (const auto& layer : body) {
    z.body.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                      Vector::Zero(layer.bias.size())});
  }
  z.head = {Matrix::Zero(head.weight.rows(), head.weight.cols()),
            Vector::Zero(head.bias.size())};
  return z;
}

EncoderParams init_encoder(std::uint64_t seed, std::span<const int> dims,
                           int vocab_size) {
  if (dims.size() < 2) {
    throw ValidationError("encoder dims need at least input and output");
  }
  for (int d : dims) {
    if (d < 1) throw ValidationError("encoder dims must be positive");
  }
  if (vocab_size < 2) {
    throw ValidationError("vocab size must be at least 2 (word + blank)");
  }
  std::mt19937_64 rng(seed);
  EncoderParams params;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    params.body.push_back(init_layer(rng, dims[l], dims[l + 1]));
  }
  params.head = init_layer(rng, dims.back(), vocab_size);
  return params;
}

EmbeddingSequence forward(const EncoderParams& params, const Matrix& frames) {
  auto acts = body_activations(params, frames);
  EmbeddingSequence out;
  out.embeddings = std::move(acts.back());
  apply_affine(params.head, out.embeddings, out.logits);
  return out;
}

EmbeddingSequence forward(const EncoderParams& params,
                          const FrameMatrix& frames) {
  return forward(params, Matrix(frames.cast<double>()));
}

EncoderParams backward(const EncoderParams& params, const Matrix& frames,
                       const Matrix& grad_embeddings,
                       const Matrix& grad_logits) {
  const auto acts = body_activations(params, frames);
  const Eigen::Index t_len = frames.rows();
  if (grad_embeddings.rows() != t_len ||
      grad_embeddings.cols() != params.embedding_dim() ||
      grad_logits.rows() != t_len ||
      grad_logits.cols() != params.vocab_size()) {
    throw ValidationError("upstream gradient shape mismatch");
  }

  EncoderParams grads;
  grads.body.resize(params.body.size());
  grads.head.weight = grad_logits.transpose() * acts.back();
  grads.head.bias = grad_logits.colwise().sum().transpose();

  // Gradient w.r.t. the current layer's output.
  Matrix delta = grad_embeddings + grad_logits * params.head.weight;
  for (std::size_t l = params.body.size(); l-- > 0;) {
    if (l + 1 < params.body.size()) {
      // acts[l+1] = tanh(pre); d tanh = 1 - tanh^2
      delta = (delta.array() * (1.0 - acts[l + 1].array().square())).matrix();
    }
    grads.body[l].weight = delta.transpose() * acts[l];
    grads.body[l].bias = delta.colwise().sum().transpose();
    if (l > 0) delta = delta * params.body[l].weight;
  }
  return grads;
}

std::vector<std::uint8_t> encode_checkpoint(const EncoderParams& params) {
  params.validate();
  std::vector<std::uint8_t> bytes(kPbmMagic.begin(), kPbmMagic.end());
  const auto dims = params.dims();
  put_u32(bytes, static_cast<std::uint32_t>(dims.size()));
  for (int d : dims) put_u32(bytes, static_cast<std::uint32_t>(d));
  put_u32(bytes, static_cast<std::uint32_t>(params.vocab_size()));
  const Vector flat = params.flatten();
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    put_f32(bytes, static_cast<float>(flat[i]));
  }
  return bytes;
}

EncoderParams decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                                const std::string& context) {
  if (bytes.size() < 8 ||
      !std::equal(kPbmMagic.begin(), kPbmMagic.end(), bytes.begin())) {
    throw ValidationError("not a PBM1 checkpoint: " + context);
  }
  const std::uint32_t n_dims = get_u32(bytes, 4);
  if (n_dims < 2 || bytes.size() < 8 + 4ull * (n_dims + 1)) {
    throw ValidationError("truncated PBM1 header: " + context);
  }
  std::vector<int> dims;
  for (std::uint32_t i = 0; i < n_dims; ++i) {
    dims.push_back(static_cast<int>(get_u32(bytes, 8 + 4 * i)));
  }
  const int vocab = static_cast<int>(get_u32(bytes, 8 + 4 * n_dims));
  auto params = init_encoder(0, dims, vocab);
  const std::size_t offset = 12 + 4ull * n_dims;
  if (bytes.size() != offset + 4 * params.parameter_count()) {
    throw ValidationError("PBM1 size mismatch: " + context);
  }
  Vector flat(static_cast<Eigen::Index>(params.parameter_count()));
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    flat[i] = get_f32(bytes, offset + 4 * static_cast<std::size_t>(i));
  }
  params.assign_flat(flat);
  params.validate();
  return params;
}

void save_checkpoint(const EncoderParams& params,
                     const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(params));
}

EncoderParams load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw IoError("missing checkpoint: " + path.string());
  }
  return decode_checkpoint(read_file_bytes(path), path.string());
}

}  // namespace pbdsr
