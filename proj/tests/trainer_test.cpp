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

#include "hiercode/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "hiercode/checkpoint.hpp"

namespace hiercode {
namespace {

namespace fs = std::filesystem;

SynthCorpus small_corpus(std::uint64_t seed = 7) {
  SynthConfig c;
  c.train_docs = 16;
  c.valid_docs = 8;
  c.seed = seed;
  return synth_corpus(c);
}

TrainConfig quick_config() {
  TrainConfig c;
  c.learning_rate = 1e-2;
  c.batch_size = 4;
  c.max_epochs = 3;
  c.patience = 3;
  return c;
}

TrainingRun quick_run(const SynthCorpus& s, const ModelConfig& model, const TrainConfig& train) {
  return run_training(s.train, s.valid, s.descriptors, std::nullopt, model, train);
}

std::vector<Matrix> values(const Model& m) {
  std::vector<Matrix> out;
  for (const auto& p : m.parameters()) out.push_back(p.tensor.value());
  return out;
}

TEST(TrainConfig, Validation) {
  EXPECT_NO_THROW(TrainConfig{}.validate());
  TrainConfig c;
  c.learning_rate = 0;
  EXPECT_NO_THROW(c.validate());
  c.learning_rate = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.patience = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.threshold = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ConfigText, RoundTripsEveryKey) {
  ModelConfig m = desk_model_config();
  m.encoder.kernel_widths = {3, 9};
  m.use_gcn = false;
  m.levels = 2;
  m.symmetrize = Symmetrize::kMax;
  TrainConfig t = desk_train_config();
  t.weight_decay = 0.1;
  t.seed = 99;
  ModelConfig m2;
  TrainConfig t2;
  parse_config_text(to_config_text(m, t), m2, t2);
  EXPECT_EQ(to_config_text(m2, t2), to_config_text(m, t));
  EXPECT_EQ(m2.encoder.kernel_widths, (std::vector<Index>{3, 9}));
  EXPECT_EQ(t2.learning_rate, 3e-3);
}

TEST(ConfigText, UnknownKeyAndBadValueRejected) {
  ModelConfig m;
  TrainConfig t;
  EXPECT_THROW(apply_config_entry("learning_rat", "1", m, t), ConfigError);
  EXPECT_THROW(apply_config_entry("lr", "fast", m, t), ConfigError);
  EXPECT_THROW(apply_config_entry("use_gcn", "maybe", m, t), ConfigError);
  EXPECT_THROW(parse_config_text("lr 0.1\n", m, t), ConfigError);
}

TEST(AdamW, ZeroLearningRateLeavesParametersBitExact) {
  const SynthCorpus s = small_corpus();
  TrainConfig config = quick_config();
  config.max_epochs = 1;
  TrainingRun run = quick_run(s, toy_model_config(), config);
  const auto before = values(*run.model);
  AdamW opt(run.model->parameter_tensors(), 0.0, 0.5);
  Rng rng(1);
  for (int k = 0; k < 3; ++k) train_step(*run.model, opt, std::span(run.train).first(4), rng);
  EXPECT_EQ(values(*run.model), before);
}

TEST(AdamW, DecayIsDecoupledFromGradient) {
  Tensor p = Tensor::parameter(Matrix::Random(3, 4));
  const Matrix before = p.value();
  const double lr = 0.1, wd = 0.25;
  AdamW opt({p}, lr, wd);
  opt.step();  // gradient is zero, so only the decay acts
  EXPECT_LE((p.value() - before * (1 - lr * wd)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(AdamW, FirstStepMovesEachCoordinateByLearningRate) {
  Tensor p = Tensor::parameter(Matrix::Zero(1, 3));
  p.mutable_grad() << 2.0, -0.5, 0.0;
  AdamW opt({p}, 0.01, 0.0);
  opt.step();
  EXPECT_NEAR(p.value()(0, 0), -0.01, 1e-9);
  EXPECT_NEAR(p.value()(0, 1), 0.01, 1e-9);
  EXPECT_EQ(p.value()(0, 2), 0.0);
}

TEST(AdamW, QuadraticLossStrictlyDecreases) {
  Tensor x = Tensor::parameter(Matrix::Constant(2, 3, 2.0));
  const Tensor target = Tensor::constant(Matrix::Random(2, 3));
  AdamW opt({x}, 0.05, 0.0);
  double prev = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 50; ++step) {
    x.zero_grad();
    const Tensor d = ops::add(x, ops::scale(target, -1.0));
    const Tensor loss = ops::sum(ops::mul(d, d));
    backward(loss);
    EXPECT_LT(loss.item(), prev) << "step " << step;
    prev = loss.item();
    opt.step();
  }
}

TEST(TrainStep, PaddingDoesNotChangeTheLoss) {
  const SynthCorpus s = small_corpus();
  TrainConfig config = quick_config();
  config.max_epochs = 1;
  TrainingRun run = quick_run(s, toy_model_config(), config);
  AdamW frozen(run.model->parameter_tensors(), 0.0, 0.0);
  Rng rng(2);
  ASSERT_NE(run.train[0].tokens.size(), run.train[1].tokens.size());
  const double pair = train_step(*run.model, frozen, std::span(run.train).first(2), rng);
  const double a = train_step(*run.model, frozen, std::span(run.train).subspan(0, 1), rng);
  const double b = train_step(*run.model, frozen, std::span(run.train).subspan(1, 1), rng);
  EXPECT_NEAR(pair, (a + b) / 2, 1e-12);
}

TEST(TrainStep, NonFiniteLossAborts) {
  const SynthCorpus s = small_corpus();
  TrainConfig config = quick_config();
  config.max_epochs = 1;
  TrainingRun run = quick_run(s, toy_model_config(), config);
  for (const auto& p : run.model->parameters()) {
    if (p.name == "hpm.level2.cls_bias") p.tensor.mutable_value()(0, 0) = std::nan("");
  }
  AdamW opt(run.model->parameter_tensors(), 0.01, 0.0);
  Rng rng(3);
  EXPECT_THROW(train_step(*run.model, opt, std::span(run.train).first(2), rng), NonFiniteLoss);
}

TEST(Fit, FrozenWithPatienceOneStopsAfterTwoEpochs) {
  const SynthCorpus s = small_corpus();
  TrainConfig config = quick_config();
  config.learning_rate = 0;
  config.patience = 1;
  config.max_epochs = 50;
  const TrainingRun run = quick_run(s, toy_model_config(), config);
  EXPECT_EQ(run.result.epochs_run, 2u);
  EXPECT_EQ(run.result.best_epoch, 1u);
}

TEST(Fit, SameSeedGivesIdenticalFirstEpochLoss) {
  const SynthCorpus s = small_corpus();
  TrainConfig config = quick_config();
  config.max_epochs = 2;
  ModelConfig model = toy_model_config();
  model.encoder.dropout = 0.3;
  const TrainingRun a = quick_run(s, model, config);
  const TrainingRun b = quick_run(s, model, config);
  ASSERT_FALSE(a.result.epoch_loss.empty());
  EXPECT_EQ(a.result.epoch_loss, b.result.epoch_loss);
  EXPECT_EQ(values(*a.model), values(*b.model));
  config.seed += 1;
  EXPECT_NE(quick_run(s, model, config).result.epoch_loss[0], a.result.epoch_loss[0]);
}

TEST(Fit, RestoresBestParameters) {
  const SynthCorpus s = small_corpus();
  TrainConfig config = quick_config();
  config.max_epochs = 6;
  const TrainingRun run = quick_run(s, toy_model_config(), config);
  const EvalReport again = evaluate(*run.model, run.valid, config.threshold);
  EXPECT_EQ(again.final_level().micro_f1, run.result.best_micro_f1);
}

TEST(Fit, OverlappingSplitsRejected) {
  const SynthCorpus s = small_corpus();
  EXPECT_THROW(run_training(s.train, s.train, s.descriptors, std::nullopt, toy_model_config(), quick_config()),
               ConfigError);
}

TEST(MakeExamples, UnknownCodesAreDropped) {
  const SynthCorpus s = small_corpus();
  const Prepared prep = prepare(s.train, s.descriptors, std::nullopt, toy_model_config(), quick_config());
  std::vector<Document> docs{s.train[0]};
  docs[0].codes.push_back("999.99");
  const auto plain = make_examples({s.train[0]}, prep.vocab, prep.hierarchy, kDefaultMaxLen);
  const auto extra = make_examples(docs, prep.vocab, prep.hierarchy, kDefaultMaxLen);
  ASSERT_EQ(extra.size(), 1u);
  EXPECT_EQ(extra[0].gold, plain[0].gold);
}

TEST(Prepare, LevelsSelectFinestAndBlocksAddALevel) {
  const SynthCorpus s = small_corpus();
  ModelConfig m = toy_model_config();
  EXPECT_EQ(prepare(s.train, s.descriptors, std::nullopt, m, quick_config()).hierarchy.depth(), 3u);
  SynthConfig four;
  four.codes_per_level = {2, 4, 12, 24};
  four.train_docs = 16;
  const SynthCorpus b = synth_corpus(four);
  ASSERT_TRUE(b.blocks.has_value());
  EXPECT_EQ(prepare(b.train, b.descriptors, b.blocks, m, quick_config()).hierarchy.depth(), 4u);
  m.levels = 1;
  const Prepared one = prepare(s.train, s.descriptors, std::nullopt, m, quick_config());
  ASSERT_EQ(one.hierarchy.depth(), 1u);
  EXPECT_EQ(one.cographs.size(), 1u);
  for (const auto& code : one.hierarchy.level(0)) EXPECT_NE(code.code.find('.'), std::string::npos);
}

// Parameter count written out from the layer shapes.
Index hand_count(const ModelConfig& c, Index vocab, const std::vector<std::size_t>& levels) {
  const Index e = c.encoder.embed_dim, k = c.encoder.conv_dim, r = c.encoder.res_dim;
  Index n = vocab * e;
  for (Index s : c.encoder.kernel_widths) {
    n += s * e * k + k;  // conv
    n += s * k * r + r;  // residual first
    n += s * r * r + r;  // residual second
    n += k * r + r;      // shortcut
  }
  const Index d = c.encoder.output_dim();
  const bool ont = c.hpm.ontology_attention;
  const Index f = c.feature_dim(), g = c.gcn.hidden, a = c.hpm.attention_dim, dep = c.hpm.dependency_dim;
  for (std::size_t t = 0; t < levels.size(); ++t) {
    const Index L = static_cast<Index>(levels[t]);
    if (ont && c.use_gcn) n += (e * g + g) + (c.gcn.layers - 1) * (g * g + g);
    if (ont) n += f * d + f;
    n += a * d + a + L * a;
    n += dep + (ont ? 2 : 1) * d + 1;
    if (c.hpm.dependency && t + 1 < levels.size()) n += (L + dep) * dep + dep;
  }
  return n;
}

TEST(ParameterCount, MatchesLayerShapesForEveryAblation) {
  const SynthCorpus s = small_corpus();
  for (int variant = 0; variant < 6; ++variant) {
    ModelConfig m = toy_model_config();
    if (variant == 1) m.use_gcn = false;
    if (variant == 2) m.hpm.ontology_attention = false;
    if (variant == 3) m.hpm.dependency = false;
    if (variant == 4) m.levels = 1;
    if (variant == 5) m.gcn.layers = 3;
    const Prepared prep = prepare(s.train, s.descriptors, std::nullopt, m, quick_config());
    std::vector<std::size_t> sizes;
    for (std::size_t t = 0; t < prep.hierarchy.depth(); ++t) sizes.push_back(prep.hierarchy.level(t).size());
    m.levels = sizes.size();
    const Model model(m, prep.vocab, prep.hierarchy, prep.propagation(), 1);
    EXPECT_EQ(model.parameter_count(), hand_count(m, prep.vocab.size(), sizes)) << "variant " << variant;
    EXPECT_EQ(model.parameter_count(), expected_parameter_count(m, prep.vocab.size(), sizes));
  }
}

TEST(ParameterCount, BypassingGcnRemovesExactlyItsWeights) {
  const SynthCorpus s = small_corpus();
  ModelConfig full = toy_model_config();
  const Prepared prep = prepare(s.train, s.descriptors, std::nullopt, full, quick_config());
  full.levels = prep.hierarchy.depth();
  ModelConfig bypass = full;
  bypass.use_gcn = false;
  const Model a(full, prep.vocab, prep.hierarchy, prep.propagation(), 1);
  const Model b(bypass, prep.vocab, prep.hierarchy, prep.propagation(), 1);
  Index gcn = 0;
  for (const auto& p : a.parameters()) {
    if (p.name.rfind("gcn.", 0) == 0) gcn += p.tensor.size();
  }
  for (const auto& p : b.parameters()) EXPECT_NE(p.name.rfind("gcn.", 0), 0u) << p.name;
  const Index d = full.encoder.output_dim();
  const Index shrink = static_cast<Index>(prep.hierarchy.depth()) * (full.gcn.hidden - full.encoder.embed_dim) * (d + 1);
  EXPECT_EQ(a.parameter_count() - b.parameter_count(), gcn + shrink);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const SynthCorpus s = small_corpus();
  const TrainConfig config = quick_config();
  const TrainingRun run = quick_run(s, toy_model_config(), config);
  const auto path = fs::temp_directory_path() / "hiercode_trainer_test.ckpt";
  save_checkpoint(path, *run.model, config, run.result.best_epoch, run.result.best_micro_f1,
                  run.result.best_report);
  const Checkpoint ck = load_checkpoint(path);
  fs::remove(path);
  EXPECT_EQ(values(*ck.model), values(*run.model));
  EXPECT_EQ(to_config_text(ck.model->config(), ck.train), to_config_text(run.model->config(), config));
  EXPECT_EQ(ck.epoch, run.result.best_epoch);
  EXPECT_EQ(ck.best_micro_f1, run.result.best_micro_f1);
  const auto before = predict_all(*run.model, run.valid);
  const auto after = predict_all(*ck.model, run.valid);
  EXPECT_EQ(after, before);
  std::ostringstream a, b;
  write_tsv(a, evaluate(*run.model, run.valid, config.threshold));
  write_tsv(b, evaluate(*ck.model, run.valid, config.threshold));
  EXPECT_EQ(a.str(), b.str());
}

TEST(Checkpoint, CorruptFilesRejected) {
  const auto path = fs::temp_directory_path() / "hiercode_bad.ckpt";
  std::ofstream(path) << "NOTACKPT";
  EXPECT_THROW(load_checkpoint(path), CheckpointError);
  std::ofstream(path) << "HIERCODE";
  EXPECT_THROW(load_checkpoint(path), CheckpointError);
  fs::remove(path);
  EXPECT_THROW(load_checkpoint(path), CheckpointError);
}

}  // namespace
}  // namespace hiercode
