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

#include "hiercode/gcn.hpp"

#include <cmath>

#include "hiercode/hierarchy.hpp"

namespace hiercode {

void GcnConfig::validate() const {
  if (layers < 1 || layers > 3) throw ConfigError("GCN depth must be 1..3");
  if (hidden <= 0) throw ConfigError("GCN hidden width must be positive");
}

std::vector<GcnLayer> init_gcn(const GcnConfig& config, Index input_dim, Rng& rng) {
  config.validate();
  std::vector<GcnLayer> layers;
  Index in = input_dim;
  for (int l = 0; l < config.layers; ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix w(in, config.hidden), b(1, config.hidden);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    for (Index i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
    layers.push_back({Tensor::parameter(std::move(w)), Tensor::parameter(std::move(b))});
    in = config.hidden;
  }
  return layers;
}

Tensor gcn_forward(const Tensor& features, const Tensor& propagation,
                   std::span<const GcnLayer> layers) {
  if (propagation.rows() != propagation.cols() || propagation.cols() != features.rows()) {
    throw DimensionError("gcn_forward: propagation " + propagation.shape_string() +
                         " does not match " + std::to_string(features.rows()) + " nodes");
  }
  Tensor h = features;
  for (const auto& layer : layers) {
    h = ops::relu(ops::add_row(ops::matmul(propagation, ops::matmul(h, layer.weight)), layer.bias));
  }
  return h;
}

}  // namespace hiercode
