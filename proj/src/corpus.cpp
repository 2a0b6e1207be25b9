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

#include "hiercode/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace hiercode {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    bool numeric = std::all_of(cur.begin(), cur.end(),
                               [](unsigned char c) { return std::isdigit(c) != 0; });
    out.push_back(numeric ? std::string(kNumToken) : cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    // Bytes >= 0x80 belong to multi-byte UTF-8 letters and stay in the run.
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary() : tokens_{"<pad>", "<unk>"} {
  index_["<pad>"] = kPadIndex;
  index_["<unk>"] = kUnkIndex;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& docs,
                             std::size_t min_count) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  std::unordered_map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& doc : docs) {
    for (const auto& tok : doc) {
      ++counts[tok];
      ++total;
    }
  }
  if (total == 0) throw IngestionError("cannot build a vocabulary from an empty corpus");

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary v;
  for (auto& [tok, n] : kept) v.extend({tok});
  return v;
}

std::size_t Vocabulary::extend(const std::vector<std::string>& tokens) {
  std::size_t added = 0;
  for (const auto& tok : tokens) {
    if (index_.emplace(tok, static_cast<Index>(tokens_.size())).second) {
      tokens_.push_back(tok);
      ++added;
    }
  }
  return added;
}

Index Vocabulary::index_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkIndex : it->second;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << i << '\t' << tokens_[i] << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw IngestionError("malformed vocab line: " + line);
    std::size_t idx = std::stoul(line.substr(0, tab));
    if (idx != tokens.size()) throw IngestionError("vocab indices must be dense and ordered");
    tokens.push_back(line.substr(tab + 1));
  }
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
    throw IngestionError("vocabulary must start with <pad>, <unk>");
  }
  Vocabulary v;
  tokens.erase(tokens.begin(), tokens.begin() + 2);
  if (v.extend(tokens) != tokens.size()) throw IngestionError("duplicate vocabulary token");
  return v;
}

std::uint64_t Vocabulary::digest() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& tok : tokens_) {
    for (unsigned char c : tok) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<Document> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open corpus " + path.string());
  std::vector<Document> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      Document d;
      d.id = j.at("id").get<std::string>();
      d.text = j.at("text").get<std::string>();
      d.codes = j.at("codes").get<std::vector<std::string>>();
      docs.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      throw IngestionError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

std::string to_jsonl(const std::vector<Document>& docs) {
  std::string out;
  for (const auto& d : docs) {
    nlohmann::json j{{"id", d.id}, {"text", d.text}, {"codes", d.codes}};
    out += j.dump() + "\n";
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, const std::vector<Document>& docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write corpus " + path.string());
  out << to_jsonl(docs);
}

EncodedRecord encode_record(const std::string& id, const std::vector<std::string>& tokens,
                            const std::vector<CodeId>& gold, const Vocabulary& vocab,
                            std::size_t max_len) {
  EncodedRecord out;
  out.record.id = id;
  out.record.gold = gold;
  const std::size_t n = std::min(tokens.size(), max_len);
  out.record.tokens.reserve(n);
  bool any_known = false;
  for (std::size_t i = 0; i < n; ++i) {
    Index idx = vocab.index_of(tokens[i]);
    any_known = any_known || idx != kUnkIndex;
    out.record.tokens.push_back(idx);
  }
  if (!any_known) {
    out.flagged = true;
    std::clog << "warning: record '" << id << "' has no in-vocabulary tokens; skipped\n";
  }
  return out;
}

std::vector<CodeId> normalize_codes(const std::vector<std::string>& raw) {
  std::vector<CodeId> out;
  for (const auto& r : raw) out.push_back(normalize_code(r));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::string> descriptor_tokens(const Hierarchy& h, const CodeId& code) {
  auto toks = tokenize(h.descriptor(code.code));
  if (toks.empty()) toks.push_back(code.code);
  return toks;
}

std::size_t load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                            Matrix& embedding) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open embeddings " + path.string());
  std::size_t count = 0, dim = 0;
  {
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    if (!(hs >> count >> dim)) throw IngestionError("embeddings header must be '<count> <dim>'");
  }
  if (static_cast<Index>(dim) != embedding.cols()) {
    throw IngestionError("embedding dimension " + std::to_string(dim) + " does not match model width " +
                         std::to_string(embedding.cols()));
  }
  std::size_t loaded = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    Index idx = vocab.index_of(tok);
    if (idx == kUnkIndex && tok != "<unk>") continue;
    if (idx == kPadIndex) continue;
    for (std::size_t k = 0; k < dim; ++k) {
      if (!(ls >> embedding(idx, static_cast<Index>(k)))) {
        throw IngestionError("short embedding row for '" + tok + "'");
      }
    }
    ++loaded;
  }
  return loaded;
}

namespace {

// Splits `total` children as evenly as possible over `parents`.
std::vector<std::size_t> split_even(std::size_t total, std::size_t parents) {
  std::vector<std::size_t> out(parents, total / parents);
  for (std::size_t i = 0; i < total % parents; ++i) ++out[i];
  return out;
}

std::string pad3(std::size_t v) {
  std::string s = std::to_string(v);
  return std::string(3 - std::min<std::size_t>(3, s.size()), '0') + s;
}

struct SynthCodes {
  std::vector<CodeId> finest;
  std::optional<BlockTable> blocks;
};

// Synthesizes ICD-shaped finest codes whose build_hierarchy levels have
// exactly the configured sizes.
SynthCodes synth_codes(const std::vector<std::size_t>& counts) {
  const std::size_t depth = counts.size();
  if (depth < 2 || depth > 4) throw ConfigError("synthetic hierarchy needs 2 to 4 levels");
  for (std::size_t t = 0; t < depth; ++t) {
    if (counts[t] == 0) throw ConfigError("every level needs at least one code");
    if (t > 0 && counts[t] < counts[t - 1]) throw ConfigError("level sizes must be nondecreasing");
  }
  if (std::adjacent_find(counts.begin(), counts.end(), std::less<>()) == counts.end()) {
    throw ConfigError("synthetic hierarchy needs at least one parent with two children");
  }

  // Categories (3-digit, from 100), optionally grouped into blocks.
  std::vector<std::string> categories;
  std::optional<BlockTable> blocks;
  std::size_t next = 0;  // offset into levels of `counts`
  if (depth == 4) {
    std::vector<Block> table;
    auto per_block = split_even(counts[1], counts[0]);
    std::size_t cat = 100;
    for (std::size_t b = 0; b < counts[0]; ++b) {
      std::string lo = pad3(cat);
      for (std::size_t k = 0; k < per_block[b]; ++k) categories.push_back(pad3(cat++));
      table.push_back(Block{lo, pad3(cat - 1), "synthetic block " + std::to_string(b),
                            CodeKind::kDiagnosis});
    }
    blocks = BlockTable(std::move(table));
    next = 2;
  } else if (depth == 3) {
    for (std::size_t c = 0; c < counts[0]; ++c) categories.push_back(pad3(100 + c));
    next = 1;
  }

  // Subcategories.
  std::vector<std::string> subcats;
  if (depth == 2) {
    for (std::size_t s = 0; s < counts[0]; ++s) {
      subcats.push_back(pad3(100 + s / 10) + "." + std::to_string(s % 10));
    }
    next = 1;
  } else {
    auto per_cat = split_even(counts[next], categories.size());
    for (std::size_t c = 0; c < categories.size(); ++c) {
      if (per_cat[c] > 10) throw ConfigError("at most 10 subcategories per category");
      for (std::size_t k = 0; k < per_cat[c]; ++k) {
        subcats.push_back(categories[c] + "." + std::to_string(k));
      }
    }
    ++next;
  }

  SynthCodes out;
  auto per_sub = split_even(counts[next], subcats.size());
  for (std::size_t s = 0; s < subcats.size(); ++s) {
    if (per_sub[s] > 10) throw ConfigError("at most 10 codes per subcategory");
    for (std::size_t k = 0; k < per_sub[s]; ++k) {
      out.finest.push_back(CodeId{subcats[s] + std::to_string(k), CodeKind::kDiagnosis});
    }
  }
  out.blocks = std::move(blocks);
  return out;
}

}  // namespace

SynthCorpus synth_corpus(const SynthConfig& config) {
  SynthCodes codes = synth_codes(config.codes_per_level);
  const std::size_t n_codes = codes.finest.size();
  const std::size_t n_triggers = n_codes * config.triggers_per_code;
  if (config.triggers_per_code == 0) throw ConfigError("triggers_per_code must be >= 1");
  if (n_triggers + 1 > config.vocab_size) {
    throw ConfigError("vocab_size " + std::to_string(config.vocab_size) +
                      " too small for " + std::to_string(n_triggers) +
                      " disjoint trigger tokens plus noise");
  }
  if (config.signal < 0.0 || config.signal > 1.0) throw ConfigError("signal must be in [0,1]");

  std::mt19937_64 rng(config.seed);
  std::vector<std::string> vocab(config.vocab_size);
  for (std::size_t i = 0; i < vocab.size(); ++i) vocab[i] = "tok" + std::to_string(i);

  // Rank order decides frequency; shuffle so the head spans categories.
  std::vector<std::size_t> rank(n_codes);
  std::iota(rank.begin(), rank.end(), 0);
  std::shuffle(rank.begin(), rank.end(), rng);

  SynthCorpus out;
  for (std::size_t r = 0; r < n_codes; ++r) out.codes.push_back(codes.finest[rank[r]]);

  std::vector<bool> reserved(n_codes, false);
  for (const auto& p : config.planted) {
    if (p.a >= n_codes || p.b >= n_codes || p.a == p.b || p.together > p.total || p.total == 0) {
      throw ConfigError("invalid planted pair");
    }
    if (p.together < p.total && n_codes < 3) throw ConfigError("planted pair needs a third code");
    reserved[p.a] = true;
  }

  std::vector<double> p(n_codes, 0.0);
  double p_empty = 1.0;
  for (std::size_t r = 0; r < n_codes; ++r) {
    if (reserved[r]) continue;
    p[r] = std::min(1.0, config.head_probability * std::pow(double(r + 1), -config.power_law));
    p_empty *= 1.0 - p[r];
  }
  if (p_empty >= 1.0) throw ConfigError("no sampleable codes");
  out.inclusion_probability.resize(n_codes);
  for (std::size_t r = 0; r < n_codes; ++r) out.inclusion_probability[r] = p[r] / (1.0 - p_empty);

  auto trigger = [&](std::size_t r, std::size_t k) {
    return vocab[r * config.triggers_per_code + k];
  };
  if (config.noise_power_law < 0.0) throw ConfigError("noise_power_law must be >= 0");
  std::vector<double> noise_weights(config.vocab_size - n_triggers);
  for (std::size_t k = 0; k < noise_weights.size(); ++k) {
    noise_weights[k] = std::pow(double(k + 1), -config.noise_power_law);
  }
  std::discrete_distribution<std::size_t> noise_rank(noise_weights.begin(), noise_weights.end());
  auto noise = [&](std::mt19937_64& g) { return n_triggers + noise_rank(g); };
  std::bernoulli_distribution emit(config.signal);

  auto make_doc = [&](const std::string& id, const std::vector<std::size_t>& gold) {
    std::vector<std::string> words;
    for (std::size_t r : gold) {
      for (std::size_t k = 0; k < config.triggers_per_code; ++k) {
        if (emit(rng)) words.push_back(trigger(r, k));
      }
    }
    for (std::size_t k = 0; k < config.noise_tokens; ++k) words.push_back(vocab[noise(rng)]);
    if (words.empty()) words.push_back(vocab[noise(rng)]);
    std::shuffle(words.begin(), words.end(), rng);
    Document d;
    d.id = id;
    for (std::size_t i = 0; i < words.size(); ++i) d.text += (i ? " " : "") + words[i];
    for (std::size_t r : gold) d.codes.push_back(out.codes[r].code);
    std::sort(d.codes.begin(), d.codes.end());
    return d;
  };

  auto sample_gold = [&] {
    std::vector<std::size_t> gold;
    while (gold.empty()) {
      for (std::size_t r = 0; r < n_codes; ++r) {
        if (p[r] > 0.0 && std::bernoulli_distribution(p[r])(rng)) gold.push_back(r);
      }
    }
    return gold;
  };

  char buf[32];
  for (std::size_t i = 0; i < config.train_docs; ++i) {
    std::snprintf(buf, sizeof buf, "train-%05zu", i);
    out.train.push_back(make_doc(buf, sample_gold()));
  }
  std::size_t planted_id = 0;
  for (const auto& pp : config.planted) {
    std::uniform_int_distribution<std::size_t> other(0, n_codes - 1);
    for (std::size_t k = 0; k < pp.total; ++k) {
      std::size_t partner = pp.b;
      if (k >= pp.together) {
        do partner = other(rng); while (partner == pp.a || partner == pp.b);
      }
      std::snprintf(buf, sizeof buf, "plant-%05zu", planted_id++);
      out.train.push_back(make_doc(buf, {pp.a, partner}));
    }
  }
  for (std::size_t i = 0; i < config.valid_docs; ++i) {
    std::snprintf(buf, sizeof buf, "valid-%05zu", i);
    out.valid.push_back(make_doc(buf, sample_gold()));
  }

  out.blocks = codes.blocks;
  out.hierarchy = build_hierarchy(codes.finest, config.codes_per_level.size(), codes.blocks);

  // Finest descriptors are the trigger tokens; coarser codes take the first
  // trigger of every descendant.
  std::map<std::string, std::vector<std::string>> words;
  for (std::size_t r = 0; r < n_codes; ++r) {
    const CodeId& code = out.codes[r];
    for (std::size_t k = 0; k < config.triggers_per_code; ++k) words[code.code].push_back(trigger(r, k));
    for (std::size_t t = 0; t + 1 < out.hierarchy.depth(); ++t) {
      words[out.hierarchy.ancestor(code, t).code].push_back(trigger(r, 0));
    }
  }
  for (auto& [code, ws] : words) {
    std::sort(ws.begin(), ws.end());
    ws.erase(std::unique(ws.begin(), ws.end()), ws.end());
    std::string text;
    for (std::size_t i = 0; i < ws.size(); ++i) text += (i ? " " : "") + ws[i];
    out.descriptors[code] = text;
  }
  out.hierarchy.set_descriptors(out.descriptors);
  return out;
}

}  // namespace hiercode
