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

// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <random>

#include "pbdsr/prototype.hpp"
#include "pbdsr/synthgen.hpp"
#include "pbdsr/trainer.hpp"

namespace {

pbdsr::Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  pbdsr::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

pbdsr::PrototypeSet prototypes(int count, int dim) {
  std::vector<int> ids(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) ids[static_cast<std::size_t>(i)] = i;
  return pbdsr::build_prototypes(random_matrix(count, dim, 1), ids);
}

template <bool kParallel>
void BM_BatchClassify(benchmark::State& state) {
  const auto protos = prototypes(455, 16);
  const auto queries = random_matrix(static_cast<int>(state.range(0)), 16, 2);
  for (auto _ : state) {
    auto out = kParallel ? pbdsr::batch_classify(queries, protos)
                         : pbdsr::reference::batch_classify(queries, protos);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BatchClassify<false>)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchClassify<true>)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

template <bool kParallel>
void BM_BatchObjective(benchmark::State& state) {
  const auto corpus = pbdsr::generate(pbdsr::SynthConfig{});
  pbdsr::UtteranceList batch;
  for (int i = 0; i < state.range(0); ++i) {
    batch.push_back(&corpus.utterances[static_cast<std::size_t>(i)]);
  }
  const std::vector<int> dims = {16, 32, 16};
  const auto params = pbdsr::init_encoder(3, dims, corpus.vocabulary.size());
  const int blank = corpus.vocabulary.blank_id();
  for (auto _ : state) {
    auto obj = kParallel
                   ? pbdsr::batch_objective(params, batch, blank, true, 0.07)
                   : pbdsr::reference::batch_objective(params, batch, blank, true, 0.07);
    benchmark::DoNotOptimize(obj.loss);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BatchObjective<false>)->Arg(32)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BatchObjective<true>)->Arg(32)->Arg(256)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
