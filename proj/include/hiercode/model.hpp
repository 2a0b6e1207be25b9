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

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hiercode/cograph.hpp"
#include "hiercode/corpus.hpp"
#include "hiercode/encoder.hpp"
#include "hiercode/gcn.hpp"
#include "hiercode/hierarchy.hpp"
#include "hiercode/hpm.hpp"

namespace hiercode {

struct ModelConfig {
  EncoderConfig encoder;
  GcnConfig gcn;
  HpmConfig hpm;
  // false bypasses the co-graph GCN: code features are the raw descriptor
  // embeddings and the ontology projection takes embed_dim inputs.
  bool use_gcn = true;
  // Number of finest hierarchy levels to predict; 0 means all.
  std::size_t levels = 0;
  Symmetrize symmetrize = Symmetrize::kAverage;

  void validate() const;
  // Width of the code features fed to ontology attention.
  Index feature_dim() const { return use_gcn ? gcn.hidden : encoder.embed_dim; }
};

// Small dimensions for gradient checks.
ModelConfig toy_model_config();

// Sized for the synthetic corpus on one core: width-1 filters (synthetic
// text has no word order), 64-wide layers, light dropout.
ModelConfig desk_model_config();

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

// All learnable parameters plus the fixed context (vocabulary, hierarchy
// levels, descriptor ids, propagation matrices) they are defined over.
class Model {
 public:
  // `hierarchy` holds exactly the predicted levels; `propagation[t]` is the
  // normalized co-graph of level t (ignored when the GCN is bypassed).
  Model(ModelConfig config, Vocabulary vocab, Hierarchy hierarchy,
        std::vector<Matrix> propagation, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const Hierarchy& hierarchy() const { return hierarchy_; }
  const std::vector<Matrix>& propagation() const { return propagation_; }
  std::size_t depth() const { return hierarchy_.depth(); }

  const EncoderParams& encoder() const { return encoder_; }
  const std::vector<std::vector<GcnLayer>>& gcn() const { return gcn_; }
  const std::vector<LevelParams>& levels() const { return levels_; }
  const std::vector<std::vector<Index>>& descriptor_ids(std::size_t t) const {
    return descriptor_ids_.at(t);
  }

  // Per-level code features: GCN output over the descriptor embeddings, or
  // the descriptor embeddings themselves without the GCN. Empty when
  // ontology attention is off. Recomputed from the current embedding table.
  std::vector<Tensor> code_features() const;

  Tensor encode(std::span<const Index> tokens, const std::vector<bool>& valid, bool training,
                Rng& rng) const;

  std::vector<LevelOutput> forward(std::span<const Index> tokens, const std::vector<bool>& valid,
                                   std::span<const Tensor> features, bool training,
                                   Rng& rng) const;

  // Eval-mode probabilities, one row vector per level.
  std::vector<Eigen::RowVectorXd> predict(std::span<const Index> tokens) const;

  const std::vector<NamedParameter>& parameters() const { return params_; }
  std::vector<Tensor> parameter_tensors() const;
  Index parameter_count() const;
  void zero_grad() const;

 private:
  void register_parameters();

  ModelConfig config_;
  Vocabulary vocab_;
  Hierarchy hierarchy_;
  std::vector<Matrix> propagation_;
  std::vector<Tensor> propagation_tensors_;
  std::vector<std::vector<std::vector<Index>>> descriptor_ids_;

  EncoderParams encoder_;
  std::vector<std::vector<GcnLayer>> gcn_;
  std::vector<LevelParams> levels_;
  std::vector<NamedParameter> params_;
};

// Closed-form parameter count for a configuration over the given level sizes.
Index expected_parameter_count(const ModelConfig& config, Index vocab_size,
                               std::span<const std::size_t> level_sizes);

// Small end-to-end problem: 30-token vocabulary, two levels (4 and 6 codes),
// one random document and gold set, and the toy model configuration.
struct ToyProblem {
  std::unique_ptr<Model> model;
  std::vector<Index> tokens;
  LevelSets gold;
};
ToyProblem toy_problem(std::uint64_t seed, ModelConfig config = toy_model_config());

// Sum of the level losses of the toy document in training mode (dropout 0
// keeps it deterministic).
Tensor toy_loss(const ToyProblem& toy);

// Max relative error of the analytic gradient against central differences
// over every parameter of the toy model.
double toy_gradcheck(std::uint64_t seed, double eps = 1e-6);

}  // namespace hiercode
