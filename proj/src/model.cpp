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

#include "hiercode/model.hpp"

#include <algorithm>
#include <limits>
#include <map>

namespace hiercode {

void ModelConfig::validate() const {
  encoder.validate();
  gcn.validate();
  hpm.validate();
}

ModelConfig toy_model_config() {
  ModelConfig c;
  c.encoder.embed_dim = 6;
  c.encoder.kernel_widths = {3, 5};
  c.encoder.conv_dim = 6;
  c.encoder.res_dim = 3;
  c.encoder.dropout = 0.0;
  c.gcn.hidden = 4;
  c.hpm.attention_dim = 4;
  c.hpm.dependency_dim = 3;
  return c;
}

ModelConfig desk_model_config() {
  ModelConfig c;
  c.encoder.embed_dim = 64;
  c.encoder.kernel_widths = {1};
  c.encoder.conv_dim = 64;
  c.encoder.res_dim = 32;
  c.encoder.dropout = 0.1;
  c.gcn.hidden = 64;
  c.hpm.attention_dim = 64;
  c.hpm.dependency_dim = 64;
  return c;
}

Model::Model(ModelConfig config, Vocabulary vocab, Hierarchy hierarchy,
             std::vector<Matrix> propagation, std::uint64_t seed)
    : config_(std::move(config)),
      vocab_(std::move(vocab)),
      hierarchy_(std::move(hierarchy)),
      propagation_(std::move(propagation)) {
  config_.validate();
  const std::size_t depth = hierarchy_.depth();
  if (config_.levels != 0 && config_.levels != depth) {
    throw ConfigError("model configured for " + std::to_string(config_.levels) +
                      " levels but the hierarchy has " + std::to_string(depth));
  }
  const bool need_graph = config_.use_gcn && config_.hpm.ontology_attention;
  if (need_graph && propagation_.size() != depth) {
    throw ConfigError("need one propagation matrix per level");
  }

  for (std::size_t t = 0; t < depth; ++t) {
    std::vector<std::vector<Index>> ids;
    for (const auto& code : hierarchy_.level(t)) {
      std::vector<Index> row;
      for (const auto& tok : descriptor_tokens(hierarchy_, code)) row.push_back(vocab_.index_of(tok));
      ids.push_back(std::move(row));
    }
    descriptor_ids_.push_back(std::move(ids));
    if (need_graph) {
      const auto n = static_cast<Index>(hierarchy_.level(t).size());
      if (propagation_[t].rows() != n || propagation_[t].cols() != n) {
        throw DimensionError("propagation matrix for level " + std::to_string(t) +
                             " does not match " + std::to_string(n) + " codes");
      }
      propagation_tensors_.push_back(Tensor::constant(propagation_[t]));
    }
  }

  Rng rng(seed);
  encoder_ = init_encoder(config_.encoder, vocab_.size(), rng);
  for (std::size_t t = 0; t < depth; ++t) {
    if (need_graph) gcn_.push_back(init_gcn(config_.gcn, config_.encoder.embed_dim, rng));
    levels_.push_back(init_level(config_.hpm, static_cast<Index>(hierarchy_.level(t).size()),
                                 config_.encoder.output_dim(), config_.feature_dim(),
                                 t + 1 == depth, rng));
  }
  register_parameters();
}

void Model::register_parameters() {
  auto add = [this](std::string name, const Tensor& t) {
    if (t.defined()) params_.push_back({std::move(name), t});
  };
  add("embedding", encoder_.embedding);
  for (std::size_t k = 0; k < encoder_.branches.size(); ++k) {
    const auto& b = encoder_.branches[k];
    const std::string p = "encoder.branch" + std::to_string(k) + ".";
    add(p + "conv.weight", b.conv.weight);
    add(p + "conv.bias", b.conv.bias);
    add(p + "res1.weight", b.residual.first.weight);
    add(p + "res1.bias", b.residual.first.bias);
    add(p + "res2.weight", b.residual.second.weight);
    add(p + "res2.bias", b.residual.second.bias);
    add(p + "res3.weight", b.residual.shortcut.weight);
    add(p + "res3.bias", b.residual.shortcut.bias);
  }
  for (std::size_t t = 0; t < gcn_.size(); ++t) {
    for (std::size_t l = 0; l < gcn_[t].size(); ++l) {
      const std::string p = "gcn.level" + std::to_string(t) + ".layer" + std::to_string(l) + ".";
      add(p + "weight", gcn_[t][l].weight);
      add(p + "bias", gcn_[t][l].bias);
    }
  }
  for (std::size_t t = 0; t < levels_.size(); ++t) {
    const auto& lp = levels_[t];
    const std::string p = "hpm.level" + std::to_string(t) + ".";
    add(p + "ontology_proj", lp.ontology_proj);
    add(p + "ontology_bias", lp.ontology_bias);
    add(p + "code_proj", lp.code_proj);
    add(p + "code_bias", lp.code_bias);
    add(p + "code_queries", lp.code_queries);
    add(p + "cls_weight", lp.cls_weight);
    add(p + "cls_bias", lp.cls_bias);
    add(p + "dpu_weight", lp.dpu_weight);
    add(p + "dpu_bias", lp.dpu_bias);
  }
}

std::vector<Tensor> Model::code_features() const {
  std::vector<Tensor> out;
  if (!config_.hpm.ontology_attention) return out;
  for (std::size_t t = 0; t < depth(); ++t) {
    Tensor v = ontology_embed(descriptor_ids_[t], encoder_.embedding);
    if (config_.use_gcn) v = gcn_forward(v, propagation_tensors_[t], gcn_[t]);
    out.push_back(std::move(v));
  }
  return out;
}

Tensor Model::encode(std::span<const Index> tokens, const std::vector<bool>& valid,
                     bool training, Rng& rng) const {
  return encode_document(tokens, valid, encoder_, config_.encoder.dropout, training, rng);
}

std::vector<LevelOutput> Model::forward(std::span<const Index> tokens,
                                        const std::vector<bool>& valid,
                                        std::span<const Tensor> features, bool training,
                                        Rng& rng) const {
  Tensor doc = encode(tokens, valid, training, rng);
  return hpl_forward(doc, features, levels_, config_.hpm, valid);
}

std::vector<Eigen::RowVectorXd> Model::predict(std::span<const Index> tokens) const {
  Rng unused(0);
  auto features = code_features();
  auto outputs = forward(tokens, {}, features, false, unused);
  std::vector<Eigen::RowVectorXd> probs;
  for (const auto& o : outputs) probs.push_back(o.probabilities.value().col(0).transpose());
  return probs;
}

std::vector<Tensor> Model::parameter_tensors() const {
  std::vector<Tensor> out;
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

Index Model::parameter_count() const {
  Index n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

void Model::zero_grad() const {
  for (const auto& p : params_) p.tensor.zero_grad();
}

Index expected_parameter_count(const ModelConfig& config, Index vocab_size,
                               std::span<const std::size_t> level_sizes) {
  const auto& e = config.encoder;
  Index n = vocab_size * e.embed_dim;
  for (Index s : e.kernel_widths) {
    n += s * e.embed_dim * e.conv_dim + e.conv_dim;  // conv
    n += s * e.conv_dim * e.res_dim + e.res_dim;     // res1
    n += s * e.res_dim * e.res_dim + e.res_dim;      // res2
    n += e.conv_dim * e.res_dim + e.res_dim;         // res3 (1x1)
  }
  const Index d_res = e.output_dim();
  const Index d_feat = config.feature_dim();
  const Index d_a = config.hpm.attention_dim;
  const Index d_dep = config.hpm.dependency_dim;
  const bool onto = config.hpm.ontology_attention;
  for (std::size_t t = 0; t < level_sizes.size(); ++t) {
    const auto codes = static_cast<Index>(level_sizes[t]);
    if (onto && config.use_gcn) {
      Index in = e.embed_dim;
      for (int l = 0; l < config.gcn.layers; ++l) {
        n += in * config.gcn.hidden + config.gcn.hidden;
        in = config.gcn.hidden;
      }
    }
    if (onto) n += d_feat * d_res + d_feat;
    n += d_a * d_res + d_a + codes * d_a;
    n += (d_dep + (onto ? 2 : 1) * d_res) + 1;
    if (config.hpm.dependency && t + 1 < level_sizes.size()) {
      n += (codes + d_dep) * d_dep + d_dep;
    }
  }
  return n;
}

ToyProblem toy_problem(std::uint64_t seed, ModelConfig config) {
  Rng rng(seed);
  std::vector<std::string> tokens{"<pad>", "<unk>"};
  for (int i = 0; i < 28; ++i) tokens.push_back("w" + std::to_string(i));
  Vocabulary vocab = Vocabulary::from_tokens(tokens);  // plus <pad>, <unk>: 30

  std::vector<CodeId> finest;
  for (const char* c : {"100.11", "100.12", "100.21", "101.11", "101.12", "101.21"}) {
    finest.push_back(normalize_code(c));
  }
  Hierarchy h = build_hierarchy(finest, 2);
  std::map<std::string, std::string> descriptors;
  std::uniform_int_distribution<int> word(0, 27);
  for (std::size_t t = 0; t < h.depth(); ++t) {
    for (const auto& code : h.level(t)) {
      descriptors[code.code] = "w" + std::to_string(word(rng)) + " w" + std::to_string(word(rng));
    }
  }
  h.set_descriptors(std::move(descriptors));

  std::bernoulli_distribution coin(0.4);
  std::vector<LevelSets> records;
  for (int r = 0; r < 12; ++r) {
    std::vector<CodeId> gold;
    for (const auto& c : finest) {
      if (coin(rng)) gold.push_back(c);
    }
    records.push_back(expand_labels(gold, h));
  }
  std::vector<Matrix> propagation;
  for (std::size_t t = 0; t < h.depth(); ++t) {
    propagation.push_back(build_cograph(records, h, t, config.symmetrize).propagation);
  }

  ToyProblem toy;
  std::uniform_int_distribution<Index> tok(2, 29);
  for (int j = 0; j < 9; ++j) toy.tokens.push_back(tok(rng));
  toy.gold = records.front();
  toy.model = std::make_unique<Model>(std::move(config), std::move(vocab), std::move(h),
                                      std::move(propagation), seed);
  return toy;
}

Tensor toy_loss(const ToyProblem& toy) {
  Rng rng(0);
  auto features = toy.model->code_features();
  auto outputs = toy.model->forward(toy.tokens, {}, features, true, rng);
  return hierarchical_loss(outputs, toy.gold);
}

double toy_gradcheck(std::uint64_t seed, double eps) {
  ToyProblem toy = toy_problem(seed);
  Rng rng(seed + 1);
  const auto params = toy.model->parameter_tensors();
  return grad_check<double>([&toy] { return toy_loss(toy); }, params, eps, rng,
                            std::numeric_limits<std::size_t>::max());
}

}  // namespace hiercode
