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
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "hiercode/hierarchy.hpp"
#include "hiercode/tensor.hpp"

namespace hiercode {

struct IngestionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kNumToken = "NUM";
inline constexpr Index kPadIndex = 0;
inline constexpr Index kUnkIndex = 1;
inline constexpr std::size_t kDefaultMaxLen = 2500;

// Lowercased alphanumeric runs; all-digit runs become NUM; punctuation drops.
std::vector<std::string> tokenize(const std::string& text);

class Vocabulary {
 public:
  Vocabulary();

  // Tokens seen at least `min_count` times, most frequent first, ties by
  // token. Throws IngestionError on an empty corpus.
  static Vocabulary build(const std::vector<std::vector<std::string>>& docs,
                          std::size_t min_count);

  // Appends tokens not yet present; returns how many were added.
  std::size_t extend(const std::vector<std::string>& tokens);

  Index index_of(const std::string& token) const;  // kUnkIndex if unseen
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  const std::string& token(Index i) const { return tokens_.at(static_cast<std::size_t>(i)); }
  Index size() const { return static_cast<Index>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // vocab.tsv: `<index>\t<token>` per line.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::uint64_t digest() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, Index> index_;
};

// One line of corpus.jsonl.
struct Document {
  std::string id;
  std::string text;
  std::vector<std::string> codes;
};

std::vector<Document> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, const std::vector<Document>& docs);
std::string to_jsonl(const std::vector<Document>& docs);

struct Record {
  std::string id;
  std::vector<Index> tokens;
  std::vector<CodeId> gold;
};

struct EncodedRecord {
  Record record;
  // Set when no token is in-vocabulary; callers skip such records.
  bool flagged = false;
};

// Head-first truncation at max_len; out-of-vocabulary tokens map to unknown.
EncodedRecord encode_record(const std::string& id, const std::vector<std::string>& tokens,
                            const std::vector<CodeId>& gold, const Vocabulary& vocab,
                            std::size_t max_len = kDefaultMaxLen);

std::vector<CodeId> normalize_codes(const std::vector<std::string>& raw);

// Descriptor tokens for a code: tokenized descriptor text, or the code
// string itself as a single token when no usable descriptor exists.
std::vector<std::string> descriptor_tokens(const Hierarchy& h, const CodeId& code);

// Reads `<count> <dim>` then `<token> <floats>` lines into rows of
// `embedding` for tokens in `vocab`; returns the number of rows loaded.
std::size_t load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                            Matrix& embedding);

// Deterministically places `together` of `total` records of code `a` with
// code `b`; the rest pair `a` with one other random code.
struct PlantedPair {
  std::size_t a = 0;  // finest-level code indices
  std::size_t b = 1;
  std::size_t together = 2;
  std::size_t total = 3;
};

struct SynthConfig {
  std::vector<std::size_t> codes_per_level{4, 12, 24};  // coarse to fine
  std::size_t train_docs = 64;
  std::size_t valid_docs = 32;
  std::size_t vocab_size = 200;
  double signal = 1.0;          // probability each trigger token is emitted
  std::size_t triggers_per_code = 2;
  std::size_t noise_tokens = 8;  // per document
  // Noise word k (0-based) is drawn with weight (k+1)^-noise_power_law, so a
  // few filler words dominate as in natural text; 0 draws uniformly.
  double noise_power_law = 1.5;
  double power_law = 1.0;        // inclusion probability ∝ (rank+1)^-power_law
  double head_probability = 0.5;
  std::vector<PlantedPair> planted;
  std::uint64_t seed = 7;
};

struct SynthCorpus {
  std::vector<Document> train;
  std::vector<Document> valid;
  std::vector<CodeId> codes;                   // finest codes, rank order
  // Marginal probability that a sampled (non-planted) record carries each
  // finest code, accounting for the resampling of empty label sets.
  std::vector<double> inclusion_probability;
  Hierarchy hierarchy;
  std::map<std::string, std::string> descriptors;
  std::optional<BlockTable> blocks;
};

SynthCorpus synth_corpus(const SynthConfig& config);

}  // namespace hiercode
