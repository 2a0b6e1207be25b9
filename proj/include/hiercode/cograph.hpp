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

#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hiercode/hierarchy.hpp"
#include "hiercode/tensor.hpp"

namespace hiercode {

// How the row-normalized weight matrix becomes a symmetric adjacency.
enum class Symmetrize { kAverage, kMax, kNone };

Symmetrize parse_symmetrize(const std::string& name);
const char* to_string(Symmetrize mode);

// Co-occurrence graph over one hierarchy level.
struct CoGraph {
  std::size_t level = 0;
  std::vector<CodeId> codes;
  Matrix counts;       // count(i,j): records holding both i and j, zero diagonal
  Matrix weights;      // e(i,j) = count(i,j) / Σ_k count(i,k); zero rows when isolated
  Matrix adjacency;    // symmetrized weights
  Matrix propagation;  // D̃^{-1/2} (A + I) D̃^{-1/2}
};

// Builds the level-t graph from per-record expanded label sets.
CoGraph build_cograph(std::span<const LevelSets> records, const Hierarchy& h,
                      std::size_t level, Symmetrize mode = Symmetrize::kAverage);

// Symmetric normalized propagation matrix with self-loops. Throws
// ContractError for non-square, asymmetric or negative input.
Matrix normalize_adjacency(const Matrix& adjacency);

// `<level>\t<code_i>\t<code_j>\t<e_ij>` for every nonzero e(i,j).
void export_cograph(std::ostream& out, const CoGraph& graph);

}  // namespace hiercode
