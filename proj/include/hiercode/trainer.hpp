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
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hiercode/corpus.hpp"
#include "hiercode/metrics.hpp"
#include "hiercode/model.hpp"

namespace hiercode {

struct NonFiniteLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 5e-5;
  std::size_t batch_size = 16;
  std::size_t patience = 10;  // epochs without strict validation improvement
  std::size_t max_epochs = 200;
  std::uint64_t seed = 13;
  double threshold = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t min_count = 1;  // vocabulary cutoff
  std::size_t max_len = kDefaultMaxLen;

  void validate() const;
};

// Optimizer settings that pair with desk_model_config(): a larger step and
// smaller batches than the defaults, which assume corpora of thousands of
// records.
TrainConfig desk_train_config();

// Flat key=value view of both configs, the same keys the CLI accepts.
std::vector<std::pair<std::string, std::string>> config_entries(const ModelConfig& model,
                                                                const TrainConfig& train);
// Throws ConfigError for an unknown key or unparsable value.
void apply_config_entry(const std::string& key, const std::string& value, ModelConfig& model,
                        TrainConfig& train);
std::string to_config_text(const ModelConfig& model, const TrainConfig& train);
void parse_config_text(const std::string& text, ModelConfig& model, TrainConfig& train);

struct Example {
  std::string id;
  std::vector<Index> tokens;
  LevelSets gold;  // per predicted level
};

// Encodes documents against the vocabulary and expands their codes over the
// hierarchy. Records with no in-vocabulary token are skipped; codes outside
// the hierarchy are dropped with a warning.
std::vector<Example> make_examples(const std::vector<Document>& docs, const Vocabulary& vocab,
                                   const Hierarchy& hierarchy, std::size_t max_len);

// Everything derived from the training split before a model exists.
struct Prepared {
  Vocabulary vocab;
  Hierarchy hierarchy;             // predicted levels only, descriptors attached
  std::vector<CoGraph> cographs;   // one per predicted level
  std::vector<Matrix> propagation() const;
};

// Builds the hierarchy from the training codes (depth 4 with a block table,
// else 3), keeps the finest `model.levels` levels, builds the vocabulary
// (extended with descriptor tokens) and the per-level co-graphs.
Prepared prepare(const std::vector<Document>& train, const std::map<std::string, std::string>& descriptors,
                 const std::optional<BlockTable>& blocks, const ModelConfig& model,
                 const TrainConfig& config);

// Decoupled-weight-decay Adam:
//   θ ← θ − lr·m̂/(√v̂ + ε) − lr·λ·θ
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, double lr, double weight_decay, double beta1 = 0.9,
        double beta2 = 0.999, double epsilon = 1e-8);
  void step();
  std::size_t steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Matrix> m_, v_;
  double lr_, wd_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

// Right-pads token lists to the longest one; valid[i][j] flags real tokens.
struct PaddedBatch {
  std::vector<std::vector<Index>> tokens;
  std::vector<std::vector<bool>> valid;
};
PaddedBatch pad_batch(std::span<const Example> batch);

// Zeroes gradients, accumulates the mean record loss over the padded batch
// in record order, and takes one optimizer step. Throws NonFiniteLoss.
double train_step(const Model& model, AdamW& optimizer, std::span<const Example> batch, Rng& rng);

// Eval-mode probabilities, one N×|L^t| matrix per level.
std::vector<Matrix> predict_all(const Model& model, std::span<const Example> examples);

EvalReport evaluate(const Model& model, std::span<const Example> examples, double threshold);

// One `epoch,split,level,macro_auc,micro_auc,macro_f1,micro_f1,p@5,p@8,p@15` line per level.
void log_epoch(std::ostream& out, std::size_t epoch, const std::string& split,
               const EvalReport& report);

struct FitResult {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_micro_f1 = -1;
  EvalReport best_report;        // validation report of the restored parameters
  std::vector<double> epoch_loss;  // mean batch loss per epoch
};

// Trains until `patience` epochs pass without a strict gain in final-level
// validation micro-F1, or max_epochs. Restores the best parameters.
FitResult fit(const Model& model, const std::vector<Example>& train,
              const std::vector<Example>& valid, const TrainConfig& config,
              std::ostream* log = nullptr);

// prepare → model → fit in one call.
struct TrainingRun {
  std::unique_ptr<Model> model;
  std::vector<Example> train;
  std::vector<Example> valid;
  FitResult result;
};
TrainingRun run_training(const std::vector<Document>& train, const std::vector<Document>& valid,
                         const std::map<std::string, std::string>& descriptors,
                         const std::optional<BlockTable>& blocks, const ModelConfig& model,
                         const TrainConfig& config, std::ostream* log = nullptr);

}  // namespace hiercode
