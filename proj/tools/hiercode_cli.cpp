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

// hiercode: command-line front end.
//
//   synth            write a synthetic corpus (train/valid jsonl, descriptors)
//   build-hierarchy  derive the level tables from a corpus
//   build-cograph    export per-level co-occurrence weights
//   train            fit a model and write a checkpoint
//   evaluate         score a checkpoint on a corpus
//   predict          per-record code probabilities as TSV
//   gradcheck        analytic vs numeric gradients on the toy model
//   sweep-levels     train once per level count and print a comparison table

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hiercode/checkpoint.hpp"
#include "hiercode/cograph.hpp"
#include "hiercode/corpus.hpp"
#include "hiercode/hierarchy.hpp"
#include "hiercode/metrics.hpp"
#include "hiercode/model.hpp"
#include "hiercode/trainer.hpp"

namespace fs = std::filesystem;
using namespace hiercode;

namespace {

constexpr int kUsageExit = 2;

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

// Registers one `--<key>` flag per config key. Resolution order: defaults,
// then the --config file, then flags given on the command line.
struct ConfigFlags {
  std::map<std::string, std::string> given;
  std::string config_file;
  bool no_orl = false;
  bool no_hpl = false;

  void attach(CLI::App* app) {
    const ModelConfig m;
    const TrainConfig t;
    for (const auto& [key, def] : config_entries(m, t)) {
      app->add_option("--" + dashed(key), given[key], "default " + def)->default_str("");
    }
    app->add_option("--config", config_file, "key=value file; flags override it");
    app->add_flag("--no-orl", no_orl, "bypass the co-graph GCN (descriptor embeddings only)");
    app->add_flag("--no-hpl", no_hpl, "predict the finest level only");
  }

  std::pair<ModelConfig, TrainConfig> resolve(const CLI::App* app) const {
    ModelConfig m;
    TrainConfig t;
    if (!config_file.empty()) {
      std::string text = read_file(config_file);
      std::istringstream in(text);
      std::string line, normalized;
      while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) std::replace(line.begin(), line.begin() + static_cast<std::ptrdiff_t>(eq), '-', '_');
        normalized += line + "\n";
      }
      parse_config_text(normalized, m, t);
    }
    for (const auto& [key, value] : given) {
      if (app->count("--" + dashed(key)) > 0) apply_config_entry(key, value, m, t);
    }
    if (no_orl) m.use_gcn = false;
    if (no_hpl) {
      m.levels = 1;
      if (no_orl) m.hpm.ontology_attention = false;
    }
    m.validate();
    t.validate();
    return {m, t};
  }
};

std::optional<BlockTable> blocks_from(const std::string& path, bool icd9) {
  if (!path.empty()) return BlockTable::load(path);
  if (icd9) return BlockTable::icd9_default();
  return std::nullopt;
}

std::map<std::string, std::string> descriptors_from(const std::string& path) {
  if (path.empty()) return {};
  return load_descriptors(path);
}

std::vector<std::size_t> parse_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) out.push_back(std::stoul(part));
  return out;
}

int run_synth(const SynthConfig& config, const fs::path& out_dir) {
  SynthCorpus corpus = synth_corpus(config);
  fs::create_directories(out_dir);
  write_corpus(out_dir / "train.jsonl", corpus.train);
  write_corpus(out_dir / "valid.jsonl", corpus.valid);
  save_descriptors(out_dir / "descriptors.tsv", corpus.descriptors);
  if (corpus.blocks) {
    std::ofstream(out_dir / "blocks.tsv") << corpus.blocks->serialize();
  }
  std::clog << "wrote " << corpus.train.size() << " train and " << corpus.valid.size()
            << " validation records over " << corpus.codes.size() << " codes to "
            << out_dir.string() << '\n';
  return 0;
}

int run_build_hierarchy(const fs::path& corpus, std::size_t depth,
                        const std::optional<BlockTable>& blocks, const fs::path& out) {
  std::vector<CodeId> finest;
  for (const auto& doc : read_corpus(corpus)) {
    for (auto& c : normalize_codes(doc.codes)) finest.push_back(std::move(c));
  }
  Hierarchy h = build_hierarchy(finest, depth, blocks);
  save_hierarchy(out, h);
  for (std::size_t t = 0; t < h.depth(); ++t) {
    std::clog << "level " << t + 1 << ": " << h.level(t).size() << " codes\n";
  }
  return 0;
}

int run_build_cograph(const fs::path& corpus, const fs::path& hierarchy_path, Symmetrize mode,
                      const fs::path& out) {
  Hierarchy h = load_hierarchy(hierarchy_path);
  std::vector<LevelSets> sets;
  for (const auto& doc : read_corpus(corpus)) {
    std::vector<CodeId> gold;
    for (auto& c : normalize_codes(doc.codes)) {
      if (h.index_of(h.depth() - 1, c.code)) gold.push_back(std::move(c));
    }
    sets.push_back(expand_labels(gold, h));
  }
  std::ofstream file;
  std::ostream* sink = &std::cout;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw ConfigError("cannot write " + out.string());
    sink = &file;
  }
  for (std::size_t t = 0; t < h.depth(); ++t) export_cograph(*sink, build_cograph(sets, h, t, mode));
  return 0;
}

int run_train(const fs::path& train_path, const fs::path& valid_path,
              const std::string& descriptor_path, const std::optional<BlockTable>& blocks,
              const ModelConfig& model, const TrainConfig& config, const fs::path& out,
              const std::string& log_path) {
  auto train = read_corpus(train_path);
  auto valid = read_corpus(valid_path);
  std::ofstream log_file;
  std::ostream* log = &std::cout;
  if (!log_path.empty()) {
    log_file.open(log_path);
    log = &log_file;
  }
  *log << "epoch,split,level,macro_auc,micro_auc,macro_f1,micro_f1,p@5,p@8,p@15\n";
  TrainingRun run =
      run_training(train, valid, descriptors_from(descriptor_path), blocks, model, config, log);
  save_checkpoint(out, *run.model, config, run.result.best_epoch, run.result.best_micro_f1,
                  run.result.best_report);
  std::clog << "epochs " << run.result.epochs_run << ", best epoch " << run.result.best_epoch
            << ", validation micro-F1 " << run.result.best_micro_f1 << ", parameters "
            << run.model->parameter_count() << "; checkpoint " << out.string() << '\n';
  return 0;
}

int run_evaluate(const fs::path& checkpoint, const fs::path& corpus, const std::string& tsv,
                 bool check) {
  Checkpoint ck = load_checkpoint(checkpoint);
  const auto examples = make_examples(read_corpus(corpus), ck.model->vocab(),
                                      ck.model->hierarchy(), ck.train.max_len);
  EvalReport report = evaluate(*ck.model, examples, ck.train.threshold);
  std::cout << format_table({{"model", report}});
  if (!tsv.empty()) {
    std::ofstream out(tsv);
    write_tsv(out, report);
  } else {
    write_tsv(std::cout, report);
  }
  if (check) {
    std::ostringstream a, b;
    write_tsv(a, report);
    write_tsv(b, ck.report);
    if (a.str() != b.str()) {
      std::cerr << "error: metrics differ from those stored in the checkpoint\n" << b.str();
      return 1;
    }
    std::clog << "metrics match the checkpoint exactly\n";
  }
  return 0;
}

int run_predict(const fs::path& checkpoint, const fs::path& corpus, std::size_t top_k,
                const std::string& out_path) {
  Checkpoint ck = load_checkpoint(checkpoint);
  const Model& model = *ck.model;
  std::vector<Example> examples;
  for (const auto& doc : read_corpus(corpus)) {
    auto enc = encode_record(doc.id, tokenize(doc.text), {}, model.vocab(), ck.train.max_len);
    if (!enc.flagged) examples.push_back({doc.id, std::move(enc.record.tokens), {}});
  }
  const auto scores = predict_all(model, examples);
  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty()) {
    file.open(out_path);
    out = &file;
  }
  out->precision(17);
  for (std::size_t r = 0; r < examples.size(); ++r) {
    for (std::size_t t = 0; t < scores.size(); ++t) {
      const auto& codes = model.hierarchy().level(t);
      std::vector<std::size_t> order(codes.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      const auto row = scores[t].row(static_cast<Index>(r));
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return row(static_cast<Index>(a)) > row(static_cast<Index>(b));
      });
      for (std::size_t k = 0; k < order.size(); ++k) {
        const double p = row(static_cast<Index>(order[k]));
        const bool keep = top_k > 0 ? k < top_k : p >= ck.train.threshold;
        if (!keep) continue;
        *out << examples[r].id << '\t' << t + 1 << '\t' << codes[order[k]].code << '\t' << p << '\n';
      }
    }
  }
  return 0;
}

int run_gradcheck(std::uint64_t seed, double eps) {
  const double err = toy_gradcheck(seed, eps);
  std::cout << "max relative error " << err << '\n';
  if (err < 1e-4) return 0;
  std::cerr << "error: gradient check failed (>= 1e-4)\n";
  return 1;
}

int run_sweep(const fs::path& train_path, const fs::path& valid_path,
              const std::string& descriptor_path, const std::optional<BlockTable>& blocks,
              ModelConfig model, const TrainConfig& config, const std::vector<std::size_t>& counts,
              const std::string& log_path) {
  auto train = read_corpus(train_path);
  auto valid = read_corpus(valid_path);
  auto descriptors = descriptors_from(descriptor_path);
  std::ofstream log_file;
  if (!log_path.empty()) log_file.open(log_path);
  std::vector<std::pair<std::string, EvalReport>> rows;
  for (std::size_t n : counts) {
    model.levels = n;
    std::clog << "training with " << n << " level(s)\n";
    TrainingRun run = run_training(train, valid, descriptors, blocks, model, config,
                                   log_path.empty() ? nullptr : &log_file);
    rows.emplace_back("T=" + std::to_string(n), run.result.best_report);
  }
  std::cout << format_table(rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical multi-label clinical code assignment"};
  app.require_subcommand(1);

  // synth
  SynthConfig synth;
  std::string synth_out = "synth";
  std::string synth_levels = "4,12,24";
  std::vector<std::size_t> planted;
  auto* sy = app.add_subcommand("synth", "write a synthetic corpus");
  sy->add_option("--seed", synth.seed);
  sy->add_option("--out-dir", synth_out);
  sy->add_option("--codes-per-level", synth_levels, "comma-separated, coarse to fine");
  sy->add_option("--train-docs", synth.train_docs);
  sy->add_option("--valid-docs", synth.valid_docs);
  sy->add_option("--vocab-size", synth.vocab_size);
  sy->add_option("--signal", synth.signal);
  sy->add_option("--triggers-per-code", synth.triggers_per_code);
  sy->add_option("--noise-tokens", synth.noise_tokens);
  sy->add_option("--power-law", synth.power_law);
  sy->add_option("--noise-power-law", synth.noise_power_law);
  sy->add_option("--head-probability", synth.head_probability);
  sy->add_option("--planted", planted, "a b together total (finest rank indices)")
      ->expected(4);

  // build-hierarchy
  std::string bh_corpus, bh_out = "hierarchy.tsv", bh_blocks;
  std::size_t bh_depth = 3;
  bool bh_icd9 = false;
  auto* bh = app.add_subcommand("build-hierarchy", "derive hierarchy levels from a corpus");
  bh->add_option("--corpus", bh_corpus)->required();
  bh->add_option("--depth", bh_depth, "2..4; 4 needs a block table");
  bh->add_option("--blocks", bh_blocks, "block table TSV");
  bh->add_flag("--icd9-blocks", bh_icd9, "use the built-in ICD-9-CM block table");
  bh->add_option("--out", bh_out);

  // build-cograph
  std::string bc_corpus, bc_hierarchy, bc_out, bc_sym = "avg";
  auto* bc = app.add_subcommand("build-cograph", "export co-occurrence weights per level");
  bc->add_option("--corpus", bc_corpus)->required();
  bc->add_option("--hierarchy", bc_hierarchy)->required();
  bc->add_option("--cograph-sym", bc_sym, "avg, max or none");
  bc->add_option("--out", bc_out);

  // train and sweep-levels share their data and config flags.
  struct DataFlags {
    std::string train, valid, descriptors, blocks, log;
    bool icd9 = false;
  };
  DataFlags tr_data, sw_data;
  ConfigFlags tr_config, sw_config;
  std::string tr_out = "model.ckpt";
  auto attach_data = [](CLI::App* cmd, DataFlags& d) {
    cmd->add_option("--train", d.train)->required();
    cmd->add_option("--valid", d.valid)->required();
    cmd->add_option("--descriptors", d.descriptors, "code descriptor TSV");
    cmd->add_option("--blocks", d.blocks, "block table TSV (adds a block level)");
    cmd->add_flag("--icd9-blocks", d.icd9, "use the built-in ICD-9-CM block table");
    cmd->add_option("--log", d.log, "per-epoch metrics CSV (default stdout)");
  };
  auto* tr = app.add_subcommand("train", "fit a model");
  attach_data(tr, tr_data);
  tr_config.attach(tr);
  tr->add_option("--out", tr_out);

  std::string sw_counts = "1,2,3";
  auto* sw = app.add_subcommand("sweep-levels", "train per level count, print a comparison");
  attach_data(sw, sw_data);
  sw_config.attach(sw);
  sw->add_option("--counts", sw_counts, "comma-separated level counts");

  // evaluate
  std::string ev_ckpt, ev_corpus, ev_tsv;
  bool ev_check = false;
  auto* ev = app.add_subcommand("evaluate", "score a checkpoint");
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--corpus", ev_corpus)->required();
  ev->add_option("--tsv", ev_tsv, "write the report TSV here");
  ev->add_flag("--check", ev_check, "fail unless metrics equal those saved in the checkpoint");

  // predict
  std::string pr_ckpt, pr_corpus, pr_out;
  std::size_t pr_top = 0;
  auto* pr = app.add_subcommand("predict", "per-record probabilities");
  pr->add_option("--checkpoint", pr_ckpt)->required();
  pr->add_option("--corpus", pr_corpus)->required();
  pr->add_option("--top-k", pr_top, "emit the K best codes per level instead of thresholding");
  pr->add_option("--out", pr_out);

  // gradcheck
  bool gc_toy = false;
  std::uint64_t gc_seed = 1;
  double gc_eps = 1e-6;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gc->add_flag("--toy", gc_toy, "use the built-in toy model")->required();
  gc->add_option("--seed", gc_seed);
  gc->add_option("--eps", gc_eps);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* failed = &app;
    for (const auto* sub : app.get_subcommands()) failed = sub;
    std::cerr << failed->help();
    return kUsageExit;
  }

  try {
    if (*sy) {
      synth.codes_per_level = parse_list(synth_levels);
      if (!planted.empty()) synth.planted.push_back({planted[0], planted[1], planted[2], planted[3]});
      return run_synth(synth, synth_out);
    }
    if (*bh) return run_build_hierarchy(bh_corpus, bh_depth, blocks_from(bh_blocks, bh_icd9), bh_out);
    if (*bc) return run_build_cograph(bc_corpus, bc_hierarchy, parse_symmetrize(bc_sym), bc_out);
    if (*tr) {
      auto [model, config] = tr_config.resolve(tr);
      return run_train(tr_data.train, tr_data.valid, tr_data.descriptors,
                       blocks_from(tr_data.blocks, tr_data.icd9), model, config, tr_out,
                       tr_data.log);
    }
    if (*sw) {
      auto [model, config] = sw_config.resolve(sw);
      return run_sweep(sw_data.train, sw_data.valid, sw_data.descriptors,
                       blocks_from(sw_data.blocks, sw_data.icd9), model, config,
                       parse_list(sw_counts), sw_data.log);
    }
    if (*ev) return run_evaluate(ev_ckpt, ev_corpus, ev_tsv, ev_check);
    if (*pr) return run_predict(pr_ckpt, pr_corpus, pr_top, pr_out);
    if (*gc) return run_gradcheck(gc_seed, gc_eps);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
