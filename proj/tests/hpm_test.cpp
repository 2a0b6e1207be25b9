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

#include <gtest/gtest.h>

#include <cmath>

#include "hiercode/hierarchy.hpp"
#include "hiercode/model.hpp"

namespace hiercode {
namespace {

HpmConfig small_hpm() {
  HpmConfig c;
  c.attention_dim = 4;
  c.dependency_dim = 3;
  return c;
}

constexpr Index kDocDim = 6;
constexpr Index kFeatureDim = 5;

struct Fixture {
  HpmConfig config = small_hpm();
  std::vector<LevelParams> levels;
  std::vector<Tensor> features;
};

Fixture make_fixture(Rng& rng, std::vector<Index> sizes, bool ontology = true, bool dependency = true) {
  Fixture f;
  f.config.ontology_attention = ontology;
  f.config.dependency = dependency;
  for (std::size_t t = 0; t < sizes.size(); ++t) {
    f.levels.push_back(init_level(f.config, sizes[t], kDocDim, kFeatureDim, t + 1 == sizes.size(), rng));
    if (ontology) f.features.push_back(Tensor::constant(Matrix::Random(sizes[t], kFeatureDim)));
  }
  return f;
}

TEST(Mau, SinglePositionGetsAllMass) {
  Rng rng(1);
  const Fixture f = make_fixture(rng, {3});
  const Tensor doc = Tensor::constant(Matrix::Random(1, kDocDim));
  const MauOutput out = mau_forward(doc, f.features[0], f.levels[0]);
  EXPECT_EQ(out.code_attention.value(), Matrix::Ones(3, 1));
  EXPECT_EQ(out.ontology_attention.value(), Matrix::Ones(3, 1));
  for (Index l = 0; l < 3; ++l) {
    EXPECT_EQ(out.summary.value().row(l).head(kDocDim), doc.value().row(0));
    EXPECT_EQ(out.summary.value().row(l).tail(kDocDim), doc.value().row(0));
  }
}

TEST(Mau, ZeroCodeFeatureGivesUniformAttentionOverValidPositions) {
  Rng rng(2);
  const Fixture f = make_fixture(rng, {2});
  Matrix h = f.features[0].value();
  h.row(1).setZero();
  const std::vector<bool> valid{true, true, false, true, false};
  const MauOutput out = mau_forward(Tensor::constant(Matrix::Random(5, kDocDim)), Tensor::constant(h),
                                    f.levels[0], valid);
  const Matrix& a = out.ontology_attention.value();
  for (Index j = 0; j < 5; ++j) {
    EXPECT_NEAR(a(1, j), valid[static_cast<std::size_t>(j)] ? 1.0 / 3 : 0.0, 1e-15);
  }
}

TEST(Mau, WithoutOntologyAttentionSummaryIsCodeOnly) {
  Rng rng(3);
  const Fixture f = make_fixture(rng, {4}, false);
  const MauOutput out = mau_forward(Tensor::constant(Matrix::Random(7, kDocDim)), Tensor(), f.levels[0]);
  EXPECT_FALSE(out.ontology_attention.defined());
  EXPECT_EQ(out.summary.cols(), kDocDim);
}

TEST(Mau, FeatureWidthMismatchRejected) {
  Rng rng(4);
  const Fixture f = make_fixture(rng, {2});
  EXPECT_THROW(mau_forward(Tensor::constant(Matrix::Random(3, kDocDim)),
                           Tensor::constant(Matrix::Random(2, kFeatureDim + 1)), f.levels[0]),
               ConfigError);
}

// Randomized padded batches: every attention row sums to one and puts
// exactly zero mass on padding, on both attention paths.
TEST(Mau, AttentionRowsAreMaskedDistributions) {
  Rng rng(5);
  const Fixture f = make_fixture(rng, {6});
  std::uniform_int_distribution<int> len(1, 30);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = len(rng), pad = len(rng) % 8;
    std::vector<bool> valid(static_cast<std::size_t>(n + pad), true);
    for (int k = 0; k < pad; ++k) valid[static_cast<std::size_t>(n + k)] = false;
    Matrix doc = Matrix::Random(n + pad, kDocDim) * 3;
    const MauOutput out = mau_forward(Tensor::constant(doc), f.features[0], f.levels[0], valid);
    for (const Tensor* a : {&out.code_attention, &out.ontology_attention}) {
      for (Index l = 0; l < a->rows(); ++l) {
        EXPECT_NEAR(a->value().row(l).sum(), 1.0, 1e-9);
        for (int k = 0; k < pad; ++k) EXPECT_EQ(a->value()(l, n + k), 0.0);
      }
    }
  }
}

TEST(Cpu, ZeroWeightsGiveOneHalf) {
  Rng rng(6);
  Fixture f = make_fixture(rng, {3});
  f.levels[0].cls_weight.mutable_value().setZero();
  f.levels[0].cls_bias.mutable_value().setZero();
  const Tensor y = cpu_forward(Tensor::constant(Matrix::Random(3, 2 * kDocDim)),
                               Tensor::constant(Matrix::Random(1, 3)), f.levels[0]);
  EXPECT_EQ(y.value(), Matrix::Constant(3, 1, 0.5));
}

TEST(Cpu, IdenticalSummariesGiveIdenticalProbabilities) {
  Rng rng(7);
  const Fixture f = make_fixture(rng, {3});
  Matrix r = Matrix::Random(3, 2 * kDocDim);
  r.row(2) = r.row(0);
  const Matrix y = cpu_forward(Tensor::constant(r), zero_dependency(3), f.levels[0]).value();
  EXPECT_EQ(y(0, 0), y(2, 0));
  EXPECT_NE(y(0, 0), y(1, 0));
}

TEST(Dpu, ZeroWeightsGiveOneHalf) {
  Rng rng(8);
  Fixture f = make_fixture(rng, {3, 5});
  f.levels[0].dpu_weight.mutable_value().setZero();
  f.levels[0].dpu_bias.mutable_value().setZero();
  const Tensor c = dpu_forward(Tensor::constant(Matrix::Random(3, 1)), Tensor::constant(Matrix::Random(1, 3)),
                               f.levels[0]);
  EXPECT_EQ(c.value(), Matrix::Constant(1, 3, 0.5));
}

TEST(Dpu, LastLevelAndAblationHaveNoDependencyWeights) {
  Rng rng(9);
  const Fixture f = make_fixture(rng, {3, 5});
  EXPECT_TRUE(f.levels[0].dpu_weight.defined());
  EXPECT_FALSE(f.levels[1].dpu_weight.defined());
  const Fixture g = make_fixture(rng, {3, 5}, true, false);
  EXPECT_FALSE(g.levels[0].dpu_weight.defined());
}

TEST(Hpl, SingleLevelIsAttentionClassifierOnZeroDependency) {
  Rng rng(10);
  const Fixture f = make_fixture(rng, {4});
  const Tensor doc = Tensor::constant(Matrix::Random(6, kDocDim));
  const auto outs = hpl_forward(doc, f.features, f.levels, f.config);
  ASSERT_EQ(outs.size(), 1u);
  const MauOutput mau = mau_forward(doc, f.features[0], f.levels[0]);
  EXPECT_EQ(outs[0].probabilities.value(), cpu_forward(mau.summary, zero_dependency(3), f.levels[0]).value());
}

TEST(Hpl, EvalModeIsDeterministic) {
  Rng rng(11);
  const Fixture f = make_fixture(rng, {2, 4, 7});
  const Tensor doc = Tensor::constant(Matrix::Random(9, kDocDim));
  const auto a = hpl_forward(doc, f.features, f.levels, f.config);
  const auto b = hpl_forward(doc, f.features, f.levels, f.config);
  for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(a[t].probabilities.value(), b[t].probabilities.value());
}

// Intervention: once c^{t-1} is replaced by a constant, level t no longer
// sees any parameter of an earlier level.
TEST(Hpl, LevelsCommunicateOnlyThroughDependency) {
  Rng rng(12);
  Fixture f = make_fixture(rng, {2, 4, 7});
  const Tensor doc = Tensor::constant(Matrix::Random(9, kDocDim));
  const Tensor constant_dep = Tensor::constant(Matrix::Random(1, 3));
  auto last_level = [&] {
    const MauOutput mau = mau_forward(doc, f.features[2], f.levels[2]);
    return cpu_forward(mau.summary, constant_dep, f.levels[2]).value();
  };
  const Matrix before = last_level();
  const Matrix full_before = hpl_forward(doc, f.features, f.levels, f.config)[2].probabilities.value();
  for (std::size_t t = 0; t < 2; ++t) {
    for (Tensor* p : {&f.levels[t].ontology_proj, &f.levels[t].code_queries, &f.levels[t].cls_weight,
                      &f.levels[t].dpu_weight}) {
      p->mutable_value().array() += 0.5;
    }
  }
  EXPECT_EQ(last_level(), before);
  EXPECT_NE(hpl_forward(doc, f.features, f.levels, f.config)[2].probabilities.value(), full_before);
}

TEST(Loss, ConfidentCorrectPredictionsNearZero) {
  LevelOutput out;
  Matrix p(3, 1);
  p << 1.0, 0.0, 1.0;
  out.probabilities = Tensor::constant(p);
  const std::vector<LevelOutput> outs{out};
  EXPECT_NEAR(hierarchical_loss(outs, {{0, 2}}).item(), 0.0, 1e-9);
}

TEST(Loss, HalfEverywhereIsCodesTimesLn2) {
  std::vector<LevelOutput> outs(2);
  outs[0].probabilities = Tensor::constant(Matrix::Constant(4, 1, 0.5));
  outs[1].probabilities = Tensor::constant(Matrix::Constant(7, 1, 0.5));
  EXPECT_NEAR(hierarchical_loss(std::span(outs).first(1), {{1}}).item(), 4 * std::log(2.0), 1e-12);
  EXPECT_NEAR(hierarchical_loss(outs, {{1}, {0, 3}}).item(), 11 * std::log(2.0), 1e-12);
  EXPECT_THROW(hierarchical_loss(outs, {{1}}), DimensionError);
}

// With the dependency unit ablated, the final level is bit-identical under any
// perturbation of earlier-level parameters; with it enabled, it changes.
TEST(Model, DependencyUnitCarriesEarlierLevels) {
  for (bool dependency : {false, true}) {
    ModelConfig config = toy_model_config();
    config.hpm.dependency = dependency;
    ToyProblem toy = toy_problem(3, config);
    const auto before = toy.model->predict(toy.tokens);
    for (const auto& p : toy.model->parameters()) {
      if (p.name.rfind("hpm.level0.", 0) == 0) p.tensor.mutable_value().array() += 0.3;
    }
    const auto after = toy.model->predict(toy.tokens);
    if (dependency) {
      EXPECT_NE(after.back(), before.back());
    } else {
      EXPECT_EQ(after.back(), before.back());
    }
    EXPECT_NE(after.front(), before.front());
  }
}

TEST(Model, WholeModelGradientCheck) { EXPECT_LT(toy_gradcheck(1), 1e-4); }

TEST(Model, WholeModelGradientCheckAtCoarserStep) { EXPECT_LT(toy_gradcheck(2, 1e-5), 1e-4); }

}  // namespace
}  // namespace hiercode
