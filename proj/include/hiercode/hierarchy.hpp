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
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace hiercode {

struct RejectedCodeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class CodeKind { kDiagnosis, kProcedure, kECode, kVCode, kBlock };

const char* to_string(CodeKind kind);
// Inverse of to_string; throws ConfigError for an unknown name.
CodeKind parse_code_kind(const std::string& name);

// An ICD-9 code in canonical dotted form ("405.01", "486", "E847.0",
// "01.23"), or a level-1 block range ("401-405").
struct CodeId {
  std::string code;
  CodeKind kind = CodeKind::kDiagnosis;

  const std::string& render() const { return code; }
  auto operator<=>(const CodeId& other) const { return code <=> other.code; }
  bool operator==(const CodeId& other) const { return code == other.code; }
};

// Canonicalizes a raw code. Undotted input gets its dot after 3 characters
// (diagnosis, V), 4 (E) or 2 (procedure); dotted input is validated.
// Undotted all-digit codes are diagnoses unless `hint` says otherwise.
CodeId normalize_code(const std::string& raw,
                      std::optional<CodeKind> hint = std::nullopt);

// Three-character category ("405"), or two for procedures.
CodeId category_of(const CodeId& code);
// One-decimal truncation ("405.0"); codes with at most one decimal map to
// themselves.
CodeId subcategory_of(const CodeId& code);

struct Block {
  std::string lo;
  std::string hi;
  std::string label;
  CodeKind kind;
};

class BlockTable {
 public:
  BlockTable() = default;
  explicit BlockTable(std::vector<Block> blocks);

  // `<lo>-<hi>\t<label>` per line; blank lines and '#' comments skipped.
  static BlockTable load(const std::filesystem::path& path);
  static BlockTable parse(const std::string& text);
  // Standard ICD-9-CM section blocks shipped with the library.
  static BlockTable icd9_default();

  // Block containing the code's category, as a CodeId "lo-hi".
  CodeId block_of(const CodeId& code) const;

  const std::vector<Block>& blocks() const { return blocks_; }
  std::string serialize() const;

 private:
  std::vector<Block> blocks_;
};

// Per-level label sets as sorted indices into Hierarchy::level(t).
using LevelSets = std::vector<std::vector<std::size_t>>;

// Inheritance structure over levels 0..depth()-1, coarse to fine. The last
// level is the set of finest codes the hierarchy was built from.
class Hierarchy {
 public:
  std::size_t depth() const { return levels_.size(); }
  const std::vector<CodeId>& level(std::size_t t) const { return levels_.at(t); }
  const std::vector<CodeId>& finest() const { return levels_.back(); }

  std::optional<std::size_t> index_of(std::size_t t, const std::string& code) const;
  // Index into level t-1 of the parent of level(t)[i]; t >= 1.
  std::size_t parent(std::size_t t, std::size_t i) const { return parents_.at(t).at(i); }

  // Ancestor (or self, at the finest level) of a finest code at level t.
  const CodeId& ancestor(const CodeId& finest_code, std::size_t t) const;

  // Descriptor text for a code; empty when none was supplied.
  const std::string& descriptor(const std::string& code) const;
  void set_descriptors(std::map<std::string, std::string> descriptors);
  const std::map<std::string, std::string>& descriptors() const { return descriptors_; }

  // View over the finest `n` levels, reindexed from 0.
  Hierarchy last_levels(std::size_t n) const;

  const std::optional<BlockTable>& block_table() const { return blocks_; }

  // FNV-1a over levels and parent links.
  std::uint64_t digest() const;

  // Reassembles a hierarchy from serialized levels and parent links,
  // validating that every non-root code has a parent in the level above.
  static Hierarchy assemble(std::vector<std::vector<CodeId>> levels,
                            std::vector<std::vector<std::size_t>> parents);
  const std::vector<std::size_t>& parents(std::size_t t) const { return parents_.at(t); }

  friend Hierarchy build_hierarchy(const std::vector<CodeId>& finest,
                                   std::size_t levels,
                                   const std::optional<BlockTable>& blocks);

 private:
  std::vector<std::vector<CodeId>> levels_;
  std::vector<std::vector<std::size_t>> parents_;  // parents_[0] empty
  std::vector<std::unordered_map<std::string, std::size_t>> index_;
  std::map<std::string, std::string> descriptors_;
  std::optional<BlockTable> blocks_;
};

// Builds `levels` (2..4) levels from the finest codes: full code, one-decimal
// truncation, 3-digit category and, at depth 4, the block range. Requires a
// block table iff levels == 4.
Hierarchy build_hierarchy(const std::vector<CodeId>& finest, std::size_t levels,
                          const std::optional<BlockTable>& blocks = std::nullopt);

// Expands a finest-level gold set to every level of `h`.
LevelSets expand_labels(const std::vector<CodeId>& gold, const Hierarchy& h);

// hierarchy.tsv: `<level>\t<code>\t<kind>\t<parent code>` per code, levels
// 1-based coarse to fine, parent "-" at level 1.
void save_hierarchy(const std::filesystem::path& path, const Hierarchy& h);
Hierarchy load_hierarchy(const std::filesystem::path& path);

// `<code>\t<descriptor text>` per line.
std::map<std::string, std::string> load_descriptors(const std::filesystem::path& path);
void save_descriptors(const std::filesystem::path& path,
                      const std::map<std::string, std::string>& descriptors);

}  // namespace hiercode
