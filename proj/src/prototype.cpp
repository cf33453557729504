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

#include "pbdsr/prototype.hpp"

#include <cmath>
#include <charconv>
#include <limits>
#include <map>
#include <sstream>

#include "pbdsr/error.hpp"
#include "pbdsr/io.hpp"

namespace pbdsr {
namespace {

void check_query(std::span<const double> embedding, const PrototypeSet& protos) {
  if (protos.size() == 0) throw ValidationError("empty prototype set");
  if (static_cast<int>(embedding.size()) != protos.dim()) {
    throw ValidationError("query dim " + std::to_string(embedding.size()) +
                          " does not match prototype dim " +
                          std::to_string(protos.dim()));
  }
  for (double v : embedding) {
    if (!std::isfinite(v)) throw ValidationError("non-finite query embedding");
  }
}

Classification scan(const double* query, const PrototypeSet& protos) {
  const int dim = protos.dim();
  Classification best;
  double best_d = std::numeric_limits<double>::infinity();
  double second_d = std::numeric_limits<double>::infinity();
  for (int r = 0; r < protos.size(); ++r) {
    const double d = squared_l2(query, protos.prototypes.row(r).data(), dim);
    if (d < best_d) {
      second_d = best_d;
      best_d = d;
      best.word_id = protos.word_ids[r];
    } else if (d < second_d) {
      second_d = d;
    }
  }
  best.distance = best_d;
  best.runner_up_margin = second_d - best_d;
  return best;
}

double parse_double(const std::string& text, const std::string& context) {
  double value = 0.0;
  auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError("bad number '" + text + "' in " + context);
  }
  return value;
}

}  // namespace

double squared_l2(const double* a, const double* b, int dim) {
  double acc = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

PrototypeSet build_prototypes(const Matrix& embeddings,
                              std::span<const int> word_ids) {
  if (embeddings.rows() == 0) throw ValidationError("empty support set");
  if (static_cast<Eigen::Index>(word_ids.size()) != embeddings.rows()) {
    throw ValidationError("support labels do not match embedding rows");
  }
  if (!embeddings.allFinite()) {
    throw ValidationError("non-finite support embedding");
  }
  std::map<int, std::pair<RowVector, int>> sums;
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    const int w = word_ids[i];
    if (w < 0) throw ValidationError("negative word id in support set");
    auto [it, inserted] = sums.try_emplace(
        w, RowVector::Zero(embeddings.cols()), 0);
    it->second.first += embeddings.row(i);
    it->second.second += 1;
  }
  PrototypeSet protos;
  protos.prototypes.resize(static_cast<Eigen::Index>(sums.size()),
                           embeddings.cols());
  Eigen::Index row = 0;
  for (const auto& [word, acc] : sums) {
    protos.prototypes.row(row++) = acc.first / acc.second;
    protos.word_ids.push_back(word);
    protos.counts.push_back(acc.second);
  }
  return protos;
}

Classification classify(std::span<const double> embedding,
                        const PrototypeSet& protos) {
  check_query(embedding, protos);
  return scan(embedding.data(), protos);
}

std::vector<Classification> batch_classify(const Matrix& embeddings,
                                           const PrototypeSet& protos) {
  const Eigen::Index m = embeddings.rows();
  std::vector<Classification> out(static_cast<std::size_t>(m));
  if (m == 0) return out;
  check_query({embeddings.row(0).data(),
               static_cast<std::size_t>(embeddings.cols())},
              protos);
  if (!embeddings.allFinite()) {
    throw ValidationError("non-finite query embedding");
  }
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < m; ++i) {
    out[static_cast<std::size_t>(i)] = scan(embeddings.row(i).data(), protos);
  }
  return out;
}

namespace reference {

std::vector<Classification> batch_classify(const Matrix& embeddings,
                                           const PrototypeSet& protos) {
  std::vector<Classification> out;
  out.reserve(static_cast<std::size_t>(embeddings.rows()));
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    out.push_back(classify({embeddings.row(i).data(),
                            static_cast<std::size_t>(embeddings.cols())},
                           protos));
  }
  return out;
}

}  // namespace reference

std::string prototypes_to_csv(const PrototypeSet& protos) {
  std::ostringstream out;
  out << "word_id,count";
  for (int d = 0; d < protos.dim(); ++d) out << ",e" << d;
  out << '\n';
  for (int r = 0; r < protos.size(); ++r) {
    out << protos.word_ids[r] << ',' << protos.counts[r];
    for (int d = 0; d < protos.dim(); ++d) {
      out << ',' << format_double(protos.prototypes(r, d));
    }
    out << '\n';
  }
  return out.str();
}

PrototypeSet prototypes_from_csv(const std::string& text,
                                 const std::string& context) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("word_id,count", 0) != 0) {
    throw ValidationError("missing prototype CSV header in " + context);
  }
  std::vector<std::vector<double>> rows;
  PrototypeSet protos;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 3) {
      throw ValidationError("short prototype row in " + context);
    }
    protos.word_ids.push_back(
        static_cast<int>(parse_double(cells[0], context)));
    protos.counts.push_back(static_cast<int>(parse_double(cells[1], context)));
    std::vector<double> values;
    for (std::size_t i = 2; i < cells.size(); ++i) {
      values.push_back(parse_double(cells[i], context));
    }
    if (!rows.empty() && values.size() != rows.front().size()) {
      throw ValidationError("ragged prototype rows in " + context);
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ValidationError("no prototypes in " + context);
  protos.prototypes.resize(static_cast<Eigen::Index>(rows.size()),
                           static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t d = 0; d < rows[r].size(); ++d) {
      protos.prototypes(static_cast<Eigen::Index>(r),
                        static_cast<Eigen::Index>(d)) = rows[r][d];
    }
  }
  for (std::size_t r = 1; r < protos.word_ids.size(); ++r) {
    if (protos.word_ids[r] <= protos.word_ids[r - 1]) {
      throw ValidationError("prototype rows not sorted by unique word id in " +
                            context);
    }
  }
  return protos;
}

void save_prototypes(const PrototypeSet& protos,
                     const std::filesystem::path& path) {
  write_file_atomic(path, prototypes_to_csv(protos));
}

PrototypeSet load_prototypes(const std::filesystem::path& path) {
  return prototypes_from_csv(read_file_text(path), path.string());
}

}  // namespace pbdsr
