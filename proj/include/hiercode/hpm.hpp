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

// Hierarchical prediction: for each level, coarse to fine,
//   attention unit   R^t = [ontology-guided ‖ code-specific] summaries
//   predicting unit  Ỹ^t = σ([c^{t-1} ‖ R^t] · W_y)
//   dependency unit  c^t = σ([Ỹ^tᵀ ‖ c^{t-1}] · W_dpu)
// with c⁰ = 0.

#pragma once

#include <span>
#include <vector>

#include "hiercode/encoder.hpp"
#include "hiercode/hierarchy.hpp"
#include "hiercode/tensor.hpp"

namespace hiercode {

struct HpmConfig {
  Index attention_dim = 300;   // rows of the code-specific projection
  Index dependency_dim = 500;  // width of c^t, including c⁰
  bool ontology_attention = true;
  bool dependency = true;  // false: c^t ≡ 0 and no dependency weights

  void validate() const;
};

struct LevelParams {
  Tensor ontology_proj;  // W′ [d_g × d_res]; undefined without ontology attention
  Tensor ontology_bias;  // [1 × d_g]
  Tensor code_proj;      // W″ [d_a × d_res]
  Tensor code_bias;      // [1 × d_a]
  Tensor code_queries;   // U″ [|L| × d_a]
  Tensor cls_weight;     // W_y [(d_dep + width(R)) × 1]
  Tensor cls_bias;       // [1 × 1]
  Tensor dpu_weight;     // W_dpu [(|L| + d_dep) × d_dep]; undefined on the last level
  Tensor dpu_bias;       // [1 × d_dep]
};

LevelParams init_level(const HpmConfig& config, Index codes, Index doc_dim,
                       Index feature_dim, bool last_level, Rng& rng);

struct MauOutput {
  Tensor summary;             // R^t [|L| × (2 or 1)·d_res]
  Tensor ontology_attention;  // [|L| × n]; undefined without ontology attention
  Tensor code_attention;      // [|L| × n]
};

// `code_features` (|L|×d_g) may be undefined when ontology attention is off.
// `valid` flags real (unpadded) document rows.
MauOutput mau_forward(const Tensor& doc, const Tensor& code_features, const LevelParams& p,
                      const std::vector<bool>& valid = {});

Tensor cpu_forward(const Tensor& summary, const Tensor& prev_dependency, const LevelParams& p);

Tensor dpu_forward(const Tensor& probabilities, const Tensor& prev_dependency,
                   const LevelParams& p);

struct LevelOutput {
  Tensor probabilities;  // Ỹ^t [|L| × 1]
  Tensor dependency;     // c^t [1 × d_dep]
  MauOutput attention;
};

Tensor zero_dependency(Index width);

// Runs every level in order, threading c^t. `code_features[t]` may be
// undefined when ontology attention is off.
std::vector<LevelOutput> hpl_forward(const Tensor& doc, std::span<const Tensor> code_features,
                                     std::span<const LevelParams> levels,
                                     const HpmConfig& config,
                                     const std::vector<bool>& valid = {});

// Σ_t Σ_i binary cross-entropy, logs clamped at 1e-12.
Tensor hierarchical_loss(std::span<const LevelOutput> outputs, const LevelSets& gold);

}  // namespace hiercode
