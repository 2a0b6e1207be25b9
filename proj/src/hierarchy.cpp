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

#include "hiercode/hierarchy.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace hiercode {
namespace {

const char kDefaultBlocks[] =
#include "icd9_blocks.inc"
    ;

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isdigit(c) != 0;
  });
}

// Length of the integer part and max decimal digits per kind.
std::pair<std::size_t, std::size_t> layout(CodeKind kind) {
  switch (kind) {
    case CodeKind::kDiagnosis: return {3, 2};
    case CodeKind::kVCode: return {3, 2};
    case CodeKind::kECode: return {4, 1};
    case CodeKind::kProcedure: return {2, 2};
    case CodeKind::kBlock: break;
  }
  return {0, 0};
}

CodeKind infer_kind(const std::string& s, std::optional<CodeKind> hint) {
  if (s[0] == 'E') return CodeKind::kECode;
  if (s[0] == 'V') return CodeKind::kVCode;
  if (!hint && s.find('.') == 2) return CodeKind::kProcedure;
  if (hint && (*hint == CodeKind::kDiagnosis || *hint == CodeKind::kProcedure)) {
    return *hint;
  }
  return CodeKind::kDiagnosis;
}

[[noreturn]] void reject(const std::string& raw, const std::string& why) {
  throw RejectedCodeError("rejected code '" + raw + "': " + why);
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Numeric position of a category within its kind, for block range tests.
std::pair<CodeKind, int> category_key(const std::string& category) {
  if (category.empty()) return {CodeKind::kBlock, -1};
  if (category[0] == 'E' || category[0] == 'V') {
    std::string digits = category.substr(1);
    if (!all_digits(digits)) return {CodeKind::kBlock, -1};
    return {category[0] == 'E' ? CodeKind::kECode : CodeKind::kVCode, std::stoi(digits)};
  }
  if (!all_digits(category)) return {CodeKind::kBlock, -1};
  return {category.size() == 2 ? CodeKind::kProcedure : CodeKind::kDiagnosis,
          std::stoi(category)};
}

}  // namespace

const char* to_string(CodeKind kind) {
  switch (kind) {
    case CodeKind::kDiagnosis: return "diagnosis";
    case CodeKind::kProcedure: return "procedure";
    case CodeKind::kECode: return "E-code";
    case CodeKind::kVCode: return "V-code";
    case CodeKind::kBlock: return "block";
  }
  return "?";
}

CodeKind parse_code_kind(const std::string& name) {
  for (CodeKind k : {CodeKind::kDiagnosis, CodeKind::kProcedure, CodeKind::kECode,
                     CodeKind::kVCode, CodeKind::kBlock}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown code kind '" + name + "'");
}

CodeId normalize_code(const std::string& raw, std::optional<CodeKind> hint) {
  std::string s = trim(raw);
  if (s.empty()) reject(raw, "empty");
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));

  const CodeKind kind = infer_kind(s, hint);
  const auto [int_len, max_dec] = layout(kind);

  std::string int_part, dec_part;
  if (auto dot = s.find('.'); dot != std::string::npos) {
    int_part = s.substr(0, dot);
    dec_part = s.substr(dot + 1);
    if (dec_part.empty()) reject(raw, "trailing dot");
  } else {
    if (s.size() < int_len) reject(raw, "too short for a " + std::string(to_string(kind)));
    int_part = s.substr(0, int_len);
    dec_part = s.substr(int_len);
  }

  std::string int_digits = int_part;
  if (kind == CodeKind::kECode || kind == CodeKind::kVCode) int_digits = int_part.substr(1);
  if (int_part.size() != int_len || !all_digits(int_digits)) {
    reject(raw, "malformed " + std::string(to_string(kind)) + " category");
  }
  if (!dec_part.empty() && (!all_digits(dec_part) || dec_part.size() > max_dec)) {
    reject(raw, "malformed decimal part");
  }
  return CodeId{dec_part.empty() ? int_part : int_part + "." + dec_part, kind};
}

CodeId category_of(const CodeId& code) {
  auto dot = code.code.find('.');
  return CodeId{code.code.substr(0, dot), code.kind};
}

CodeId subcategory_of(const CodeId& code) {
  auto dot = code.code.find('.');
  if (dot == std::string::npos || code.code.size() <= dot + 2) return code;
  return CodeId{code.code.substr(0, dot + 2), code.kind};
}

BlockTable::BlockTable(std::vector<Block> blocks) : blocks_(std::move(blocks)) {}

BlockTable BlockTable::parse(const std::string& text) {
  std::vector<Block> blocks;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    std::string range = line.substr(0, tab);
    std::string label = tab == std::string::npos ? "" : trim(line.substr(tab + 1));
    auto dash = range.find('-');
    if (dash == std::string::npos) {
      throw ConfigError("block table line " + std::to_string(lineno) +
                        ": expected <lo>-<hi>, got '" + range + "'");
    }
    Block b{range.substr(0, dash), range.substr(dash + 1), label, CodeKind::kBlock};
    auto [klo, vlo] = category_key(b.lo);
    auto [khi, vhi] = category_key(b.hi);
    if (vlo < 0 || vhi < 0 || klo != khi || vlo > vhi || b.lo.size() != b.hi.size()) {
      throw ConfigError("block table line " + std::to_string(lineno) +
                        ": invalid range '" + range + "'");
    }
    b.kind = klo;
    blocks.push_back(std::move(b));
  }
  return BlockTable(std::move(blocks));
}

BlockTable BlockTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open block table " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

BlockTable BlockTable::icd9_default() { return parse(kDefaultBlocks); }

CodeId BlockTable::block_of(const CodeId& code) const {
  const std::string category = category_of(code).code;
  auto [kind, value] = category_key(category);
  for (const auto& b : blocks_) {
    if (b.kind != kind || b.lo.size() != category.size()) continue;
    if (category_key(b.lo).second <= value && value <= category_key(b.hi).second) {
      return CodeId{b.lo + "-" + b.hi, CodeKind::kBlock};
    }
  }
  throw RejectedCodeError("rejected code '" + code.code +
                          "': no block in the block table covers category " + category);
}

std::string BlockTable::serialize() const {
  std::string out;
  for (const auto& b : blocks_) out += b.lo + "-" + b.hi + "\t" + b.label + "\n";
  return out;
}

std::optional<std::size_t> Hierarchy::index_of(std::size_t t, const std::string& code) const {
  const auto& m = index_.at(t);
  auto it = m.find(code);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

const CodeId& Hierarchy::ancestor(const CodeId& finest_code, std::size_t t) const {
  auto idx = index_of(depth() - 1, finest_code.code);
  if (!idx) {
    throw RejectedCodeError("rejected code '" + finest_code.code +
                            "': not in the finest level of the hierarchy");
  }
  std::size_t i = *idx;
  for (std::size_t level = depth() - 1; level > t; --level) i = parent(level, i);
  return levels_[t][i];
}

const std::string& Hierarchy::descriptor(const std::string& code) const {
  static const std::string kEmpty;
  auto it = descriptors_.find(code);
  return it == descriptors_.end() ? kEmpty : it->second;
}

void Hierarchy::set_descriptors(std::map<std::string, std::string> descriptors) {
  descriptors_ = std::move(descriptors);
}

Hierarchy Hierarchy::last_levels(std::size_t n) const {
  if (n < 1 || n > depth()) {
    throw ConfigError("cannot select the last " + std::to_string(n) + " of " +
                      std::to_string(depth()) + " levels");
  }
  Hierarchy h;
  const std::size_t skip = depth() - n;
  h.levels_.assign(levels_.begin() + skip, levels_.end());
  h.parents_.assign(parents_.begin() + skip, parents_.end());
  h.parents_[0].clear();
  h.index_.assign(index_.begin() + skip, index_.end());
  h.descriptors_ = descriptors_;
  h.blocks_ = blocks_;
  return h;
}

std::uint64_t Hierarchy::digest() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  };
  for (std::size_t t = 0; t < depth(); ++t) {
    mix("#level" + std::to_string(t));
    for (std::size_t i = 0; i < levels_[t].size(); ++i) {
      mix(levels_[t][i].code);
      if (t > 0) mix(std::to_string(parents_[t][i]));
    }
  }
  return h;
}

Hierarchy Hierarchy::assemble(std::vector<std::vector<CodeId>> levels,
                              std::vector<std::vector<std::size_t>> parents) {
  if (levels.empty() || parents.size() != levels.size()) {
    throw ConfigError("hierarchy needs matching level and parent tables");
  }
  Hierarchy h;
  h.index_.resize(levels.size());
  for (std::size_t t = 0; t < levels.size(); ++t) {
    if (levels[t].empty()) throw ConfigError("hierarchy level " + std::to_string(t) + " is empty");
    if (t > 0 && levels[t].size() < levels[t - 1].size()) {
      throw ConfigError("hierarchy levels must not shrink with depth");
    }
    for (std::size_t i = 0; i < levels[t].size(); ++i) {
      if (!h.index_[t].emplace(levels[t][i].code, i).second) {
        throw ConfigError("duplicate code '" + levels[t][i].code + "' in level " + std::to_string(t));
      }
    }
    if (t == 0) {
      parents[t].clear();
    } else if (parents[t].size() != levels[t].size()) {
      throw ConfigError("level " + std::to_string(t) + " parent table has the wrong length");
    } else {
      for (std::size_t p : parents[t]) {
        if (p >= levels[t - 1].size()) throw ConfigError("parent index out of range");
      }
    }
  }
  h.levels_ = std::move(levels);
  h.parents_ = std::move(parents);
  return h;
}

Hierarchy build_hierarchy(const std::vector<CodeId>& finest, std::size_t levels,
                          const std::optional<BlockTable>& blocks) {
  if (levels < 2 || levels > 4) {
    throw ConfigError("hierarchy depth must be in [2,4], got " + std::to_string(levels));
  }
  if (levels == 4 && !blocks) throw ConfigError("a depth-4 hierarchy needs a block table");
  if (levels < 4 && blocks) throw ConfigError("a block table is only used at depth 4");

  // Ancestor chain per finest code, coarse to fine, cut to `levels`.
  std::set<CodeId> unique(finest.begin(), finest.end());
  std::vector<std::vector<CodeId>> chains;
  for (const auto& c : unique) {
    if (c.kind == CodeKind::kBlock) {
      throw RejectedCodeError("rejected code '" + c.code + "': block ranges are not finest codes");
    }
    std::vector<CodeId> chain{category_of(c), subcategory_of(c), c};
    if (levels == 4) chain.insert(chain.begin(), blocks->block_of(c));
    if (levels == 2) chain.erase(chain.begin());
    chains.push_back(std::move(chain));
  }

  Hierarchy h;
  h.levels_.resize(levels);
  h.parents_.resize(levels);
  h.index_.resize(levels);
  for (std::size_t t = 0; t < levels; ++t) {
    std::set<CodeId> level;
    for (const auto& chain : chains) level.insert(chain[t]);
    h.levels_[t].assign(level.begin(), level.end());
    for (std::size_t i = 0; i < h.levels_[t].size(); ++i) h.index_[t][h.levels_[t][i].code] = i;
  }
  for (std::size_t t = 1; t < levels; ++t) {
    h.parents_[t].assign(h.levels_[t].size(), 0);
    for (const auto& chain : chains) {
      h.parents_[t][h.index_[t].at(chain[t].code)] = h.index_[t - 1].at(chain[t - 1].code);
    }
  }
  h.blocks_ = blocks;
  return h;
}

LevelSets expand_labels(const std::vector<CodeId>& gold, const Hierarchy& h) {
  const std::size_t depth = h.depth();
  LevelSets sets(depth);
  for (const auto& code : gold) {
    auto idx = h.index_of(depth - 1, code.code);
    if (!idx) {
      throw RejectedCodeError("rejected code '" + code.code + "': unknown to the hierarchy");
    }
    std::size_t i = *idx;
    for (std::size_t t = depth; t-- > 0;) {
      sets[t].push_back(i);
      if (t > 0) i = h.parent(t, i);
    }
  }
  for (auto& s : sets) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  return sets;
}

std::map<std::string, std::string> load_descriptors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open descriptor file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    std::string key = trim(line.substr(0, tab));
    try {
      key = normalize_code(key).code;
    } catch (const RejectedCodeError&) {
      // block ranges and other non-code keys are kept verbatim
    }
    out[key] = line.substr(tab + 1);
  }
  return out;
}

void save_descriptors(const std::filesystem::path& path,
                      const std::map<std::string, std::string>& descriptors) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write descriptor file " + path.string());
  for (const auto& [code, text] : descriptors) out << code << '\t' << text << '\n';
}

void save_hierarchy(const std::filesystem::path& path, const Hierarchy& h) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write hierarchy file " + path.string());
  for (std::size_t t = 0; t < h.depth(); ++t) {
    for (std::size_t i = 0; i < h.level(t).size(); ++i) {
      const CodeId& c = h.level(t)[i];
      out << t + 1 << '\t' << c.code << '\t' << to_string(c.kind) << '\t'
          << (t == 0 ? std::string("-") : h.level(t - 1)[h.parent(t, i)].code) << '\n';
    }
  }
}

Hierarchy load_hierarchy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open hierarchy file " + path.string());
  std::vector<std::vector<CodeId>> levels;
  std::vector<std::vector<std::string>> parent_codes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::size_t level = 0;
    std::string code, kind, parent;
    if (!(fields >> level >> code >> kind >> parent) || level < 1) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": malformed hierarchy row");
    }
    if (level > levels.size() + 1 || level < levels.size()) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": hierarchy rows must be grouped by level, coarse to fine");
    }
    if (level > levels.size()) {
      levels.emplace_back();
      parent_codes.emplace_back();
    }
    levels.back().push_back(CodeId{code, parse_code_kind(kind)});
    parent_codes.back().push_back(parent);
  }
  std::vector<std::vector<std::size_t>> parents(levels.size());
  for (std::size_t t = 1; t < levels.size(); ++t) {
    std::unordered_map<std::string, std::size_t> above;
    for (std::size_t i = 0; i < levels[t - 1].size(); ++i) above.emplace(levels[t - 1][i].code, i);
    for (const auto& p : parent_codes[t]) {
      auto it = above.find(p);
      if (it == above.end()) throw ConfigError("hierarchy parent '" + p + "' not found");
      parents[t].push_back(it->second);
    }
  }
  return Hierarchy::assemble(std::move(levels), std::move(parents));
}

}  // namespace hiercode
