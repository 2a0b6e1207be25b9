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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

namespace hiercode {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  if (!(in >> out) || !(in >> std::ws).eof()) {
    throw ConfigError("config '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config '" + key + "': expected true or false, got '" + value + "'");
}

// Shortest representation that parses back to the same double.
std::string fmt(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string join_widths(const std::vector<Index>& w) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) out += (i ? "," : "") + std::to_string(w[i]);
  return out;
}

std::vector<Index> parse_widths(const std::string& key, const std::string& value) {
  std::vector<Index> out;
  std::istringstream in(value);
  std::string part;
  while (std::getline(in, part, ',')) out.push_back(parse_number<Index>(key, trim(part)));
  if (out.empty()) throw ConfigError("config '" + key + "': empty list");
  return out;
}

// Finite-loss guard: report every parameter holding non-finite values.
[[noreturn]] void abort_non_finite(const Model& model, double loss, std::size_t record,
                                   const std::string& id) {
  std::ostringstream msg;
  msg << "non-finite loss " << loss << " at batch record " << record << " ('" << id << "')";
  for (const auto& p : model.parameters()) {
    if (!p.tensor.value().allFinite()) msg << "; non-finite values in " << p.name;
    if (!p.tensor.grad().allFinite()) msg << "; non-finite gradient in " << p.name;
  }
  std::clog << "error: " << msg.str() << '\n';
  throw NonFiniteLoss(msg.str());
}

}  // namespace

void TrainConfig::validate() const {
  // A zero learning rate is allowed: it freezes the parameters.
  if (!(learning_rate >= 0) || !(weight_decay >= 0)) {
    throw ConfigError("learning rate and weight decay must be non-negative");
  }
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(threshold > 0 && threshold < 1)) throw ConfigError("threshold must lie in (0,1)");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(epsilon > 0)) {
    throw ConfigError("Adam betas must lie in [0,1) and epsilon must be positive");
  }
  if (min_count < 1 || max_len < 1) throw ConfigError("min_count and max_len must be >= 1");
}

std::vector<std::pair<std::string, std::string>> config_entries(const ModelConfig& m,
                                                                const TrainConfig& t) {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"embed_dim", std::to_string(m.encoder.embed_dim)},
      {"kernel_widths", join_widths(m.encoder.kernel_widths)},
      {"conv_dim", std::to_string(m.encoder.conv_dim)},
      {"res_dim", std::to_string(m.encoder.res_dim)},
      {"dropout", fmt(m.encoder.dropout)},
      {"gcn_layers", std::to_string(m.gcn.layers)},
      {"gcn_hidden", std::to_string(m.gcn.hidden)},
      {"attention_dim", std::to_string(m.hpm.attention_dim)},
      {"dependency_dim", std::to_string(m.hpm.dependency_dim)},
      {"ontology_attention", b(m.hpm.ontology_attention)},
      {"dependency", b(m.hpm.dependency)},
      {"use_gcn", b(m.use_gcn)},
      {"levels", std::to_string(m.levels)},
      {"cograph_sym", to_string(m.symmetrize)},
      {"lr", fmt(t.learning_rate)},
      {"weight_decay", fmt(t.weight_decay)},
      {"batch_size", std::to_string(t.batch_size)},
      {"patience", std::to_string(t.patience)},
      {"max_epochs", std::to_string(t.max_epochs)},
      {"seed", std::to_string(t.seed)},
      {"threshold", fmt(t.threshold)},
      {"beta1", fmt(t.beta1)},
      {"beta2", fmt(t.beta2)},
      {"epsilon", fmt(t.epsilon)},
      {"min_count", std::to_string(t.min_count)},
      {"max_len", std::to_string(t.max_len)},
  };
}

void apply_config_entry(const std::string& key, const std::string& value, ModelConfig& m,
                        TrainConfig& t) {
  if (key == "embed_dim") m.encoder.embed_dim = parse_number<Index>(key, value);
  else if (key == "kernel_widths") m.encoder.kernel_widths = parse_widths(key, value);
  else if (key == "conv_dim") m.encoder.conv_dim = parse_number<Index>(key, value);
  else if (key == "res_dim") m.encoder.res_dim = parse_number<Index>(key, value);
  else if (key == "dropout") m.encoder.dropout = parse_number<double>(key, value);
  else if (key == "gcn_layers") m.gcn.layers = parse_number<int>(key, value);
  else if (key == "gcn_hidden") m.gcn.hidden = parse_number<Index>(key, value);
  else if (key == "attention_dim") m.hpm.attention_dim = parse_number<Index>(key, value);
  else if (key == "dependency_dim") m.hpm.dependency_dim = parse_number<Index>(key, value);
  else if (key == "ontology_attention") m.hpm.ontology_attention = parse_bool(key, value);
  else if (key == "dependency") m.hpm.dependency = parse_bool(key, value);
  else if (key == "use_gcn") m.use_gcn = parse_bool(key, value);
  else if (key == "levels") m.levels = parse_number<std::size_t>(key, value);
  else if (key == "cograph_sym") m.symmetrize = parse_symmetrize(value);
  else if (key == "lr") t.learning_rate = parse_number<double>(key, value);
  else if (key == "weight_decay") t.weight_decay = parse_number<double>(key, value);
  else if (key == "batch_size") t.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "patience") t.patience = parse_number<std::size_t>(key, value);
  else if (key == "max_epochs") t.max_epochs = parse_number<std::size_t>(key, value);
  else if (key == "seed") t.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "threshold") t.threshold = parse_number<double>(key, value);
  else if (key == "beta1") t.beta1 = parse_number<double>(key, value);
  else if (key == "beta2") t.beta2 = parse_number<double>(key, value);
  else if (key == "epsilon") t.epsilon = parse_number<double>(key, value);
  else if (key == "min_count") t.min_count = parse_number<std::size_t>(key, value);
  else if (key == "max_len") t.max_len = parse_number<std::size_t>(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::string to_config_text(const ModelConfig& model, const TrainConfig& train) {
  std::string out;
  for (const auto& [k, v] : config_entries(model, train)) out += k + "=" + v + "\n";
  return out;
}

void parse_config_text(const std::string& text, ModelConfig& model, TrainConfig& train) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line without '=': " + line);
    apply_config_entry(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), model, train);
  }
}

std::vector<Example> make_examples(const std::vector<Document>& docs, const Vocabulary& vocab,
                                   const Hierarchy& hierarchy, std::size_t max_len) {
  std::vector<Example> out;
  const std::size_t finest = hierarchy.depth() - 1;
  std::set<std::string> unknown;
  for (const auto& doc : docs) {
    std::vector<CodeId> gold;
    for (const auto& code : normalize_codes(doc.codes)) {
      if (hierarchy.index_of(finest, code.code)) {
        gold.push_back(code);
      } else {
        unknown.insert(code.code);
      }
    }
    auto enc = encode_record(doc.id, tokenize(doc.text), gold, vocab, max_len);
    if (enc.flagged) continue;
    out.push_back({doc.id, std::move(enc.record.tokens), expand_labels(gold, hierarchy)});
  }
  if (!unknown.empty()) {
    std::clog << "warning: dropped " << unknown.size()
              << " code(s) absent from the training hierarchy, e.g. '" << *unknown.begin() << "'\n";
  }
  return out;
}

std::vector<Matrix> Prepared::propagation() const {
  std::vector<Matrix> out;
  for (const auto& g : cographs) out.push_back(g.propagation);
  return out;
}

TrainConfig desk_train_config() {
  TrainConfig c;
  c.learning_rate = 3e-3;
  c.batch_size = 8;
  return c;
}

Prepared prepare(const std::vector<Document>& train,
                 const std::map<std::string, std::string>& descriptors,
                 const std::optional<BlockTable>& blocks, const ModelConfig& model,
                 const TrainConfig& config) {
  model.validate();
  config.validate();
  if (train.empty()) throw ConfigError("training split is empty");

  std::vector<CodeId> finest;
  std::vector<std::vector<std::string>> token_docs;
  for (const auto& doc : train) {
    for (auto& c : normalize_codes(doc.codes)) finest.push_back(std::move(c));
    token_docs.push_back(tokenize(doc.text));
  }
  if (finest.empty()) throw ConfigError("training split carries no codes");
  const std::size_t full_depth = blocks ? 4 : 3;
  Hierarchy full = build_hierarchy(finest, full_depth, blocks);
  const std::size_t levels = model.levels == 0 ? full_depth : model.levels;

  Prepared p;
  p.hierarchy = full.last_levels(levels);
  p.hierarchy.set_descriptors(descriptors);

  p.vocab = Vocabulary::build(token_docs, config.min_count);
  for (std::size_t t = 0; t < p.hierarchy.depth(); ++t) {
    for (const auto& code : p.hierarchy.level(t)) p.vocab.extend(descriptor_tokens(p.hierarchy, code));
  }

  std::vector<LevelSets> sets;
  for (const auto& doc : train) sets.push_back(expand_labels(normalize_codes(doc.codes), p.hierarchy));
  for (std::size_t t = 0; t < p.hierarchy.depth(); ++t) {
    p.cographs.push_back(build_cograph(sets, p.hierarchy, t, model.symmetrize));
  }
  return p;
}

AdamW::AdamW(std::vector<Tensor> params, double lr, double weight_decay, double beta1,
             double beta2, double epsilon)
    : params_(std::move(params)), lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2),
      eps_(epsilon) {
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void AdamW::step() {
  ++t_;
  const double c1 = 1 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Matrix g = params_[i].grad();
    m_[i] = beta1_ * m_[i] + (1 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1 - beta2_) * g.cwiseProduct(g);
    Matrix& theta = params_[i].mutable_value();
    const Matrix m_hat = m_[i] / c1;
    const Matrix v_hat = v_[i] / c2;
    theta.array() -=
        lr_ * m_hat.array() / (v_hat.array().sqrt() + eps_) + lr_ * wd_ * theta.array();
  }
}

PaddedBatch pad_batch(std::span<const Example> batch) {
  std::size_t longest = 0;
  for (const auto& ex : batch) longest = std::max(longest, ex.tokens.size());
  PaddedBatch out;
  for (const auto& ex : batch) {
    std::vector<Index> toks = ex.tokens;
    std::vector<bool> valid(longest, false);
    std::fill(valid.begin(), valid.begin() + static_cast<std::ptrdiff_t>(toks.size()), true);
    toks.resize(longest, kPadIndex);
    out.tokens.push_back(std::move(toks));
    out.valid.push_back(std::move(valid));
  }
  return out;
}

double train_step(const Model& model, AdamW& optimizer, std::span<const Example> batch,
                  Rng& rng) {
  if (batch.empty()) throw ConfigError("empty batch");
  model.zero_grad();
  const auto features = model.code_features();
  const auto padded = pad_batch(batch);
  Tensor total;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    auto outputs = model.forward(padded.tokens[r], padded.valid[r], features, true, rng);
    Tensor loss = hierarchical_loss(outputs, batch[r].gold);
    if (!std::isfinite(loss.item())) abort_non_finite(model, loss.item(), r, batch[r].id);
    total = total.defined() ? ops::add(total, loss) : loss;
  }
  Tensor mean = ops::scale(total, 1.0 / static_cast<double>(batch.size()));
  backward(mean);
  optimizer.step();
  return mean.item();
}

std::vector<Matrix> predict_all(const Model& model, std::span<const Example> examples) {
  std::vector<Matrix> out;
  for (std::size_t t = 0; t < model.depth(); ++t) {
    out.push_back(Matrix::Zero(static_cast<Index>(examples.size()),
                               static_cast<Index>(model.hierarchy().level(t).size())));
  }
  const auto features = model.code_features();
  Rng unused(0);
  for (std::size_t r = 0; r < examples.size(); ++r) {
    auto outputs = model.forward(examples[r].tokens, {}, features, false, unused);
    for (std::size_t t = 0; t < outputs.size(); ++t) {
      out[t].row(static_cast<Index>(r)) = outputs[t].probabilities.value().col(0).transpose();
    }
  }
  return out;
}

EvalReport evaluate(const Model& model, std::span<const Example> examples, double threshold) {
  if (examples.empty()) throw ConfigError("cannot evaluate an empty split");
  const auto scores = predict_all(model, examples);
  EvalReport report;
  for (std::size_t t = 0; t < scores.size(); ++t) {
    std::vector<std::vector<std::size_t>> gold;
    for (const auto& ex : examples) gold.push_back(ex.gold.at(t));
    report.levels.push_back(
        evaluate_level(scores[t], label_matrix(gold, scores[t].cols()), threshold, t + 1));
  }
  return report;
}

void log_epoch(std::ostream& out, std::size_t epoch, const std::string& split,
               const EvalReport& report) {
  const auto old = out.precision(6);
  for (const auto& r : report.levels) {
    out << epoch << ',' << split << ',' << r.level << ',' << r.macro_auc << ',' << r.micro_auc
        << ',' << r.macro_f1 << ',' << r.micro_f1 << ',' << r.p_at_5 << ',' << r.p_at_8 << ','
        << r.p_at_15 << '\n';
  }
  out.precision(old);
  out.flush();
}

FitResult fit(const Model& model, const std::vector<Example>& train,
              const std::vector<Example>& valid, const TrainConfig& config, std::ostream* log) {
  config.validate();
  if (train.empty() || valid.empty()) throw ConfigError("train and validation splits must be non-empty");
  {
    std::set<std::string> ids;
    for (const auto& ex : train) ids.insert(ex.id);
    for (const auto& ex : valid) {
      if (ids.count(ex.id)) throw ConfigError("record '" + ex.id + "' is in both splits");
    }
  }

  AdamW optimizer(model.parameter_tensors(), config.learning_rate, config.weight_decay,
                  config.beta1, config.beta2, config.epsilon);
  Rng rng(config.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Example> batch;

  FitResult result;
  std::vector<Matrix> best;
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        batch.push_back(train[order[i]]);
      }
      loss_sum += train_step(model, optimizer, batch, rng);
      ++batches;
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
    result.epochs_run = epoch;

    EvalReport report = evaluate(model, valid, config.threshold);
    if (log) log_epoch(*log, epoch, "valid", report);
    const double score = report.final_level().micro_f1;
    if (score > result.best_micro_f1) {
      result.best_micro_f1 = score;
      result.best_epoch = epoch;
      result.best_report = std::move(report);
      best.clear();
      for (const auto& p : model.parameters()) best.push_back(p.tensor.value());
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  const auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i].tensor.mutable_value() = best[i];
  return result;
}

TrainingRun run_training(const std::vector<Document>& train, const std::vector<Document>& valid,
                         const std::map<std::string, std::string>& descriptors,
                         const std::optional<BlockTable>& blocks, const ModelConfig& model,
                         const TrainConfig& config, std::ostream* log) {
  Prepared prep = prepare(train, descriptors, blocks, model, config);
  TrainingRun run;
  run.train = make_examples(train, prep.vocab, prep.hierarchy, config.max_len);
  run.valid = make_examples(valid, prep.vocab, prep.hierarchy, config.max_len);
  ModelConfig resolved = model;
  resolved.levels = prep.hierarchy.depth();
  run.model = std::make_unique<Model>(resolved, std::move(prep.vocab), std::move(prep.hierarchy),
                                      prep.propagation(), config.seed);
  run.result = fit(*run.model, run.train, run.valid, config, log);
  return run;
}

}  // namespace hiercode
