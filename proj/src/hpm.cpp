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

#include "hiercode/hpm.hpp"

#include <cmath>

namespace hiercode {
namespace {

Tensor uniform_param(Index rows, Index cols, Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return Tensor::parameter(std::move(m));
}

// softmax(queries · tanh(doc · projᵀ + bias)ᵀ) over document positions.
Tensor attend(const Tensor& doc, const Tensor& proj, const Tensor& bias, const Tensor& queries,
              const std::vector<bool>& valid) {
  Tensor keys = ops::tanh(ops::add_row(ops::matmul(doc, ops::transpose(proj)), bias));
  return ops::softmax_rows(ops::matmul(queries, ops::transpose(keys)), valid);
}

}  // namespace

void HpmConfig::validate() const {
  if (attention_dim <= 0 || dependency_dim <= 0) {
    throw ConfigError("attention and dependency widths must be positive");
  }
}

LevelParams init_level(const HpmConfig& config, Index codes, Index doc_dim,
                       Index feature_dim, bool last_level, Rng& rng) {
  config.validate();
  LevelParams p;
  Index summary_dim = doc_dim;
  if (config.ontology_attention) {
    p.ontology_proj = uniform_param(feature_dim, doc_dim, doc_dim, rng);
    p.ontology_bias = uniform_param(1, feature_dim, doc_dim, rng);
    summary_dim += doc_dim;
  }
  p.code_proj = uniform_param(config.attention_dim, doc_dim, doc_dim, rng);
  p.code_bias = uniform_param(1, config.attention_dim, doc_dim, rng);
  p.code_queries = uniform_param(codes, config.attention_dim, config.attention_dim, rng);
  const Index cls_in = config.dependency_dim + summary_dim;
  p.cls_weight = uniform_param(cls_in, 1, cls_in, rng);
  p.cls_bias = uniform_param(1, 1, cls_in, rng);
  if (config.dependency && !last_level) {
    const Index dpu_in = codes + config.dependency_dim;
    p.dpu_weight = uniform_param(dpu_in, config.dependency_dim, dpu_in, rng);
    p.dpu_bias = uniform_param(1, config.dependency_dim, dpu_in, rng);
  }
  return p;
}

MauOutput mau_forward(const Tensor& doc, const Tensor& code_features, const LevelParams& p,
                      const std::vector<bool>& valid) {
  MauOutput out;
  out.code_attention = attend(doc, p.code_proj, p.code_bias, p.code_queries, valid);
  Tensor code_summary = ops::matmul(out.code_attention, doc);
  if (!p.ontology_proj.defined()) {
    out.summary = code_summary;
    return out;
  }
  if (!code_features.defined() || code_features.cols() != p.ontology_proj.rows()) {
    throw ConfigError("ontology attention expects code features of width " +
                      std::to_string(p.ontology_proj.rows()) + ", got " +
                      (code_features.defined() ? code_features.shape_string() : "none"));
  }
  out.ontology_attention = attend(doc, p.ontology_proj, p.ontology_bias, code_features, valid);
  Tensor ontology_summary = ops::matmul(out.ontology_attention, doc);
  out.summary = ops::concat_cols({ontology_summary, code_summary});
  return out;
}

Tensor cpu_forward(const Tensor& summary, const Tensor& prev_dependency, const LevelParams& p) {
  Tensor features =
      ops::concat_cols({ops::broadcast_rows(prev_dependency, summary.rows()), summary});
  return ops::sigmoid(ops::add_row(ops::matmul(features, p.cls_weight), p.cls_bias));
}

Tensor dpu_forward(const Tensor& probabilities, const Tensor& prev_dependency,
                   const LevelParams& p) {
  Tensor z = ops::concat_cols({ops::transpose(probabilities), prev_dependency});
  return ops::sigmoid(ops::add_row(ops::matmul(z, p.dpu_weight), p.dpu_bias));
}

Tensor zero_dependency(Index width) { return Tensor::constant(Matrix::Zero(1, width)); }

std::vector<LevelOutput> hpl_forward(const Tensor& doc, std::span<const Tensor> code_features,
                                     std::span<const LevelParams> levels,
                                     const HpmConfig& config, const std::vector<bool>& valid) {
  std::vector<LevelOutput> outputs;
  Tensor dependency = zero_dependency(config.dependency_dim);
  for (std::size_t t = 0; t < levels.size(); ++t) {
    LevelOutput out;
    const Tensor features = t < code_features.size() ? code_features[t] : Tensor();
    out.attention = mau_forward(doc, features, levels[t], valid);
    out.probabilities = cpu_forward(out.attention.summary, dependency, levels[t]);
    if (levels[t].dpu_weight.defined()) {
      out.dependency = dpu_forward(out.probabilities, dependency, levels[t]);
    } else {
      out.dependency = zero_dependency(config.dependency_dim);
    }
    dependency = out.dependency;
    outputs.push_back(std::move(out));
  }
  return outputs;
}

Tensor hierarchical_loss(std::span<const LevelOutput> outputs, const LevelSets& gold) {
  if (gold.size() != outputs.size()) {
    throw DimensionError("loss: " + std::to_string(outputs.size()) + " levels predicted, " +
                         std::to_string(gold.size()) + " gold");
  }
  Tensor total;
  for (std::size_t t = 0; t < outputs.size(); ++t) {
    const Tensor& prob = outputs[t].probabilities;
    Matrix target = Matrix::Zero(prob.rows(), 1);
    for (std::size_t i : gold[t]) target(static_cast<Index>(i), 0) = 1.0;
    Tensor level = ops::bce_sum(prob, target);
    total = total.defined() ? ops::add(total, level) : level;
  }
  return total;
}

}  // namespace hiercode
