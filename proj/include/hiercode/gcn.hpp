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

#include <span>
#include <vector>

#include "hiercode/encoder.hpp"
#include "hiercode/tensor.hpp"

namespace hiercode {

struct GcnConfig {
  int layers = 1;      // 1..3
  Index hidden = 300;  // width of every layer

  void validate() const;
};

struct GcnLayer {
  Tensor weight;  // [d_in × hidden]
  Tensor bias;    // [1 × hidden]
};

std::vector<GcnLayer> init_gcn(const GcnConfig& config, Index input_dim, Rng& rng);

// H ← ReLU(P·H·W + b) per layer; returns the last layer's activations.
// `propagation` is the |L|×|L| normalized co-graph matrix.
Tensor gcn_forward(const Tensor& features, const Tensor& propagation,
                   std::span<const GcnLayer> layers);

}  // namespace hiercode
