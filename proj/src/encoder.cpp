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

#include "hiercode/encoder.hpp"

#include <cmath>

#include "hiercode/hierarchy.hpp"

namespace hiercode {
namespace {

Matrix uniform(Index rows, Index cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

}  // namespace

void EncoderConfig::validate() const {
  if (embed_dim <= 0 || conv_dim <= 0 || res_dim <= 0) {
    throw ConfigError("encoder widths must be positive");
  }
  if (kernel_widths.empty()) throw ConfigError("encoder needs at least one kernel width");
  for (Index w : kernel_widths) {
    if (w < 1 || w % 2 == 0) {
      throw ConfigError("kernel width " + std::to_string(w) +
                        " is not odd; same-length padding needs odd widths");
    }
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
}

ConvLayer init_conv(Index width, Index in_dim, Index out_dim, Rng& rng) {
  const Index fan_in = width * in_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  ConvLayer layer;
  layer.width = width;
  layer.weight = Tensor::parameter(uniform(fan_in, out_dim, bound, rng));
  layer.bias = Tensor::parameter(uniform(1, out_dim, bound, rng));
  return layer;
}

EncoderParams init_encoder(const EncoderConfig& config, Index vocab_size, Rng& rng) {
  config.validate();
  EncoderParams p;
  Matrix table = uniform(vocab_size, config.embed_dim, 0.25, rng);
  table.row(0).setZero();
  p.embedding = Tensor::parameter(std::move(table));
  for (Index w : config.kernel_widths) {
    FilterBranch b;
    b.conv = init_conv(w, config.embed_dim, config.conv_dim, rng);
    b.residual.first = init_conv(w, config.conv_dim, config.res_dim, rng);
    b.residual.second = init_conv(w, config.res_dim, config.res_dim, rng);
    b.residual.shortcut = init_conv(1, config.conv_dim, config.res_dim, rng);
    p.branches.push_back(std::move(b));
  }
  return p;
}

Tensor keep_rows(const Tensor& x, const std::vector<bool>& valid) {
  if (valid.empty()) return x;
  return ops::mask_rows(x, valid);
}

Tensor conv_forward(const Tensor& x, const ConvLayer& layer) {
  return ops::add_row(ops::conv1d_same(x, layer.weight, layer.width), layer.bias);
}

Tensor embed_document(std::span<const Index> tokens, const Tensor& embedding) {
  return ops::gather_rows(embedding, std::vector<Index>(tokens.begin(), tokens.end()));
}

Tensor ontology_embed(const std::vector<std::vector<Index>>& descriptors,
                      const Tensor& embedding) {
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    if (descriptors[i].empty()) {
      throw ConfigError("code " + std::to_string(i) + " has an empty descriptor");
    }
  }
  return ops::segment_mean_rows(embedding, descriptors);
}

std::vector<Tensor> multi_filter_conv(const Tensor& x, std::span<const FilterBranch> branches,
                                      const std::vector<bool>& valid) {
  std::vector<Tensor> out;
  out.reserve(branches.size());
  for (const auto& b : branches) {
    out.push_back(keep_rows(ops::tanh(conv_forward(x, b.conv)), valid));
  }
  return out;
}

Tensor residual_block(const Tensor& features, const ResidualBlock& block,
                      const std::vector<bool>& valid) {
  Tensor h1 = keep_rows(ops::tanh(conv_forward(features, block.first)), valid);
  Tensor h2 = conv_forward(h1, block.second);
  Tensor h3 = conv_forward(features, block.shortcut);
  return keep_rows(ops::tanh(ops::add(h2, h3)), valid);
}

Tensor encode(std::span<const Tensor> residual_outputs) {
  return ops::concat_cols(residual_outputs);
}

Tensor encode_document(std::span<const Index> tokens, const std::vector<bool>& valid,
                       const EncoderParams& params, double dropout, bool training,
                       Rng& rng) {
  Tensor x = keep_rows(embed_document(tokens, params.embedding), valid);
  x = ops::dropout(x, dropout, training, rng);
  auto features = multi_filter_conv(x, params.branches, valid);
  std::vector<Tensor> residuals;
  residuals.reserve(features.size());
  for (std::size_t k = 0; k < features.size(); ++k) {
    residuals.push_back(residual_block(features[k], params.branches[k].residual, valid));
  }
  return ops::dropout(encode(residuals), dropout, training, rng);
}

}  // namespace hiercode
