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

#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "pbdsr/error.hpp"
#include "pbdsr/prototype.hpp"
#include "test_util.hpp"

using namespace pbdsr;

namespace {

PrototypeSet random_protos(std::mt19937_64& rng, int count, int dim) {
  std::vector<int> ids(count);
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin(), ids.end(), rng);
  return build_prototypes(testutil::to_matrix(oracle::random_grid(rng, count, dim)),
                          ids);
}

}  // namespace

TEST_CASE("build_prototypes examples") {
  Matrix single(1, 3);
  single << 0.25, -1.0, 3.5;
  const int one[] = {4};
  const auto p1 = build_prototypes(single, one);
  CHECK(p1.prototypes == single);
  CHECK(p1.counts == std::vector<int>{1});

  Matrix pair(2, 2);
  pair << 1, 0, 0, 1;
  const int same[] = {3, 3};
  const auto p2 = build_prototypes(pair, same);
  CHECK(p2.prototypes(0, 0) == 0.5);
  CHECK(p2.prototypes(0, 1) == 0.5);
  CHECK(p2.counts == std::vector<int>{2});

  Matrix mixed(4, 2);
  mixed << 1, 1, 2, 2, 3, 3, 5, 5;
  const int ids[] = {9, 2, 9, 2};
  const int permuted[] = {2, 9, 2, 9};
  Matrix mixed_perm(4, 2);
  mixed_perm << 2, 2, 3, 3, 5, 5, 1, 1;
  const auto a = build_prototypes(mixed, ids);
  const auto b = build_prototypes(mixed_perm, permuted);
  CHECK(a.word_ids == std::vector<int>{2, 9});
  CHECK(a.word_ids == b.word_ids);
  CHECK(a.prototypes == b.prototypes);
  CHECK(a.counts == b.counts);
}

TEST_CASE("build_prototypes errors") {
  CHECK_THROWS_AS(build_prototypes(Matrix(0, 2), std::span<const int>{}),
                  ValidationError);
  const int ids[] = {0};
  CHECK_THROWS_AS(build_prototypes(Matrix::Zero(2, 2), ids), ValidationError);
}

TEST_CASE("classify exact match and tie-break") {
  Matrix rows(3, 2);
  rows << 0, 0, 4, 0, 2, 5;
  const int ids[] = {5, 2, 7};
  const auto protos = build_prototypes(rows, ids);

  const double on_seven[] = {2, 5};
  const auto c7 = classify(on_seven, protos);
  CHECK(c7.word_id == 7);
  CHECK(c7.distance == 0.0);
  CHECK(c7.runner_up_margin > 0.0);

  const double midway[] = {2, 0};
  const auto tie = classify(midway, protos);
  CHECK(tie.word_id == 2);
  CHECK(tie.distance == 4.0);
  CHECK(tie.runner_up_margin == 0.0);

  const int lone[] = {1};
  const auto single = build_prototypes(Matrix::Ones(1, 2), lone);
  CHECK(std::isinf(classify(midway, single).runner_up_margin));

  const double wrong_dim[] = {1, 2, 3};
  CHECK_THROWS_AS(classify(wrong_dim, protos), ValidationError);
  const double bad[] = {std::numeric_limits<double>::quiet_NaN(), 0};
  CHECK_THROWS_AS(classify(bad, protos), ValidationError);
}

TEST_CASE("classify equals exhaustive scan oracle") {
  std::mt19937_64 rng(41);
  int cases = 0;
  for (int round = 0; round < 10; ++round) {
    const auto protos = random_protos(rng, 50, 16);
    const auto grid = testutil::to_grid(protos.prototypes);
    const Matrix queries = testutil::to_matrix(oracle::random_grid(rng, 200, 16));
    const auto batch = batch_classify(queries, protos);
    for (Eigen::Index q = 0; q < queries.rows(); ++q) {
      std::vector<double> query(queries.row(q).begin(), queries.row(q).end());
      const auto expected = oracle::exhaustive_nearest(query, grid, protos.word_ids);
      const auto got = classify(query, protos);
      CHECK(got.word_id == expected.word_id);
      CHECK(std::abs(got.distance - expected.distance) <= 1e-12);
      CHECK(batch[static_cast<std::size_t>(q)].word_id == got.word_id);
      CHECK(batch[static_cast<std::size_t>(q)].distance == got.distance);
      ++cases;
    }
  }
  CHECK(cases >= 1000);
}

TEST_CASE("constructed ties on a lattice go to the smallest id") {
  // Prototypes at integer points, queries at integer midpoints: many exact ties.
  Matrix rows(4, 2);
  rows << 0, 0, 2, 0, 0, 2, 2, 2;
  const int ids[] = {30, 10, 40, 20};
  const auto protos = build_prototypes(rows, ids);
  const double centre[] = {1, 1};
  CHECK(classify(centre, protos).word_id == 10);
  const double left_edge[] = {0, 1};
  CHECK(classify(left_edge, protos).word_id == 30);
  const double top_edge[] = {1, 2};
  CHECK(classify(top_edge, protos).word_id == 20);
}

TEST_CASE("parallel and serial batch classification are identical") {
  std::mt19937_64 rng(42);
  const auto protos = random_protos(rng, 120, 8);
  const Matrix queries = testutil::to_matrix(oracle::random_grid(rng, 3000, 8));
  const auto par = batch_classify(queries, protos);
  const auto ser = reference::batch_classify(queries, protos);
  REQUIRE(par.size() == ser.size());
  for (std::size_t i = 0; i < par.size(); ++i) {
    CHECK(par[i].word_id == ser[i].word_id);
    CHECK(par[i].distance == ser[i].distance);
    CHECK(par[i].runner_up_margin == ser[i].runner_up_margin);
  }
}

TEST_CASE("translation invariance and squared vs true distance") {
  std::mt19937_64 rng(43);
  const auto protos = random_protos(rng, 30, 6);
  const Matrix queries = testutil::to_matrix(oracle::random_grid(rng, 300, 6));
  RowVector shift = RowVector::LinSpaced(6, -3.0, 2.0);
  PrototypeSet moved = protos;
  moved.prototypes.rowwise() += shift;
  const Matrix moved_queries = queries.rowwise() + shift;
  const auto base = batch_classify(queries, protos);
  const auto after = batch_classify(moved_queries, moved);
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(base[i].word_id == after[i].word_id);
    // True Euclidean argmin picks the same prototype.
    const RowVector q = queries.row(static_cast<Eigen::Index>(i));
    Eigen::Index best = 0;
    (protos.prototypes.rowwise() - q).rowwise().norm().minCoeff(&best);
    CHECK(protos.word_ids[static_cast<std::size_t>(best)] == base[i].word_id);
  }
}

TEST_CASE("prototype CSV round trip") {
  std::mt19937_64 rng(44);
  const auto protos = random_protos(rng, 7, 5);
  const auto back = prototypes_from_csv(prototypes_to_csv(protos), "memory");
  CHECK(back.word_ids == protos.word_ids);
  CHECK(back.counts == protos.counts);
  CHECK(back.prototypes == protos.prototypes);

  testutil::TempDir dir("protos");
  save_prototypes(protos, dir / "p.csv");
  CHECK(load_prototypes(dir / "p.csv").prototypes == protos.prototypes);
  CHECK_THROWS_AS(prototypes_from_csv("word_id,count,e0\n1,1,abc\n", "bad"),
                  ValidationError);
  CHECK_THROWS_AS(load_prototypes(dir / "missing.csv"), IoError);
}

TEST_CASE("throughput: 10k queries x 455 prototypes x 16 dims") {
  std::mt19937_64 rng(45);
  const auto protos = random_protos(rng, 455, 16);
  const Matrix queries = testutil::to_matrix(oracle::random_grid(rng, 10000, 16));
  const auto start = std::chrono::steady_clock::now();
  const auto result = reference::batch_classify(queries, protos);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  MESSAGE("serial batch_classify: " << secs << " s");
  CHECK(result.size() == 10000);
  CHECK(secs < 1.0);
}
