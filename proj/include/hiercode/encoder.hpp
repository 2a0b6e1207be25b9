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

// Document encoder: embedding lookup, code descriptor embeddings, parallel
// multi-width convolutions each followed by a residual block, and column
// concatenation of the block outputs.

#pragma once

#include <random>
#include <span>
#include <vector>

#include "hiercode/tensor.hpp"

namespace hiercode {

using Rng = std::mt19937_64;

struct EncoderConfig {
  Index embed_dim = 100;
  std::vector<Index> kernel_widths{3, 5, 9, 15, 19, 25};
  Index conv_dim = 100;  // feature width of the first convolution
  Index res_dim = 50;    // feature width of each residual block
  double dropout = 0.4;

  Index output_dim() const { return static_cast<Index>(kernel_widths.size()) * res_dim; }
  // Rejects even kernel widths and nonpositive sizes with ConfigError.
  void validate() const;
};

struct ConvLayer {
  Tensor weight;  // [(width·d_in) × d_out]
  Tensor bias;    // [1 × d_out]
  Index width = 1;
};

struct ResidualBlock {
  ConvLayer first;     // width s, conv_dim → res_dim, tanh
  ConvLayer second;    // width s, res_dim → res_dim, no activation
  ConvLayer shortcut;  // width 1, conv_dim → res_dim, no activation
};

struct FilterBranch {
  ConvLayer conv;  // width s, embed_dim → conv_dim, tanh
  ResidualBlock residual;
};

struct EncoderParams {
  Tensor embedding;  // [|V| × embed_dim]; row 0 (padding) is zero
  std::vector<FilterBranch> branches;
};

// Uniform(±1/√fan_in) for weights and biases; uniform(±0.25) embeddings.
ConvLayer init_conv(Index width, Index in_dim, Index out_dim, Rng& rng);
EncoderParams init_encoder(const EncoderConfig& config, Index vocab_size, Rng& rng);

// Applies a mask of valid rows; an empty mask keeps every row.
Tensor keep_rows(const Tensor& x, const std::vector<bool>& valid);

Tensor conv_forward(const Tensor& x, const ConvLayer& layer);

// Row j of the result is the embedding of tokens[j].
Tensor embed_document(std::span<const Index> tokens, const Tensor& embedding);

// Row i is the mean embedding of descriptor token ids descriptors[i].
Tensor ontology_embed(const std::vector<std::vector<Index>>& descriptors,
                      const Tensor& embedding);

// tanh(conv(x)) for every branch, in branch order.
std::vector<Tensor> multi_filter_conv(const Tensor& x, std::span<const FilterBranch> branches,
                                      const std::vector<bool>& valid = {});

Tensor residual_block(const Tensor& features, const ResidualBlock& block,
                      const std::vector<bool>& valid = {});

// Column concatenation of the residual outputs.
Tensor encode(std::span<const Tensor> residual_outputs);

// Full document pass: embed, dropout, branches, concat, dropout.
Tensor encode_document(std::span<const Index> tokens, const std::vector<bool>& valid,
                       const EncoderParams& params, double dropout, bool training,
                       Rng& rng);

}  // namespace hiercode
