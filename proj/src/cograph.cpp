/*
 * Copyright 2026 The hiercode Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "hiercode/cograph.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

namespace hiercode {
namespace {

Matrix add_loops_and_scale(const Matrix& adjacency) {
  const Index n = adjacency.rows();
  Matrix with_loops = adjacency + Matrix::Identity(n, n);
  Eigen::VectorXd inv_sqrt = with_loops.rowwise().sum().array().rsqrt();
  return inv_sqrt.asDiagonal() * with_loops * inv_sqrt.asDiagonal();
}

}  // namespace

Symmetrize parse_symmetrize(const std::string& name) {
  if (name == "avg") return Symmetrize::kAverage;
  if (name == "max") return Symmetrize::kMax;
  if (name == "none") return Symmetrize::kNone;
  throw ConfigError("unknown symmetrization '" + name + "' (expected avg, max or none)");
}

const char* to_string(Symmetrize mode) {
  switch (mode) {
    case Symmetrize::kAverage: return "avg";
    case Symmetrize::kMax: return "max";
    case Symmetrize::kNone: return "none";
  }
  return "?";
}

CoGraph build_cograph(std::span<const LevelSets> records, const Hierarchy& h,
                      std::size_t level, Symmetrize mode) {
  if (level >= h.depth()) {
    throw ConfigError("co-graph level " + std::to_string(level) + " out of range for depth " +
                      std::to_string(h.depth()));
  }
  const auto n = static_cast<Index>(h.level(level).size());
  CoGraph g;
  g.level = level;
  g.codes = h.level(level);
  g.counts = Matrix::Zero(n, n);
  for (const auto& sets : records) {
    const auto& s = sets.at(level);  // sorted, deduplicated
    for (std::size_t a = 0; a < s.size(); ++a) {
      for (std::size_t b = a + 1; b < s.size(); ++b) {
        const auto i = static_cast<Index>(s[a]), j = static_cast<Index>(s[b]);
        g.counts(i, j) += 1.0;
        g.counts(j, i) += 1.0;
      }
    }
  }

  g.weights = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const double total = g.counts.row(i).sum();
    if (total > 0.0) g.weights.row(i) = g.counts.row(i) / total;
  }

  switch (mode) {
    case Symmetrize::kAverage:
      g.adjacency = (g.weights + g.weights.transpose()) / 2.0;
      break;
    case Symmetrize::kMax:
      g.adjacency = g.weights.cwiseMax(g.weights.transpose());
      break;
    case Symmetrize::kNone:
      // Row-normalized weights as they are; the propagation matrix is then
      // not symmetric.
      g.adjacency = g.weights;
      g.propagation = add_loops_and_scale(g.adjacency);
      return g;
  }
  g.propagation = normalize_adjacency(g.adjacency);
  return g;
}

Matrix normalize_adjacency(const Matrix& adjacency) {
  if (adjacency.rows() != adjacency.cols()) {
    throw ContractError("adjacency must be square, got " +
                        detail::shape_str(adjacency.rows(), adjacency.cols()));
  }
  if (adjacency.size() > 0 &&
      (adjacency - adjacency.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ContractError("adjacency must be symmetric");
  }
  if (adjacency.size() > 0 && adjacency.minCoeff() < 0.0) {
    throw ContractError("adjacency must be nonnegative");
  }
  return add_loops_and_scale(adjacency);
}

void export_cograph(std::ostream& out, const CoGraph& graph) {
  const auto old = out.precision(17);
  for (Index i = 0; i < graph.weights.rows(); ++i) {
    for (Index j = 0; j < graph.weights.cols(); ++j) {
      const double e = graph.weights(i, j);
      if (e == 0.0) continue;
      out << graph.level + 1 << '\t' << graph.codes[i].code << '\t' << graph.codes[j].code << '\t'
          << e << '\n';
    }
  }
  out.precision(old);
}

}  // namespace hiercode
