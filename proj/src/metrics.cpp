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

#include "hiercode/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace hiercode {
namespace {

void check_shapes(const Matrix& scores, const Matrix& gold, const char* what) {
  if (scores.rows() != gold.rows() || scores.cols() != gold.cols()) {
    throw DimensionError(std::string(what) + ": scores " +
                         detail::shape_str(scores.rows(), scores.cols()) + " vs gold " +
                         detail::shape_str(gold.rows(), gold.cols()));
  }
}

double f1_from(double tp, double fp, double fn) {
  const double denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2 * tp / denom;
}

struct Counts {
  double tp = 0, fp = 0, fn = 0;
};

Counts confusion(const Matrix& scores, const Matrix& gold, double threshold, Index col) {
  Counts c;
  for (Index i = 0; i < scores.rows(); ++i) {
    const bool pred = scores(i, col) >= threshold;
    const bool pos = gold(i, col) > 0.5;
    c.tp += pred && pos;
    c.fp += pred && !pos;
    c.fn += !pred && pos;
  }
  return c;
}

bool has_both(const Matrix& gold, Index col) {
  bool pos = false, neg = false;
  for (Index i = 0; i < gold.rows(); ++i) (gold(i, col) > 0.5 ? pos : neg) = true;
  return pos && neg;
}

void warn_clamp(Index k, Index codes) {
  static std::set<std::pair<Index, Index>> seen;
  if (seen.insert({k, codes}).second) {
    std::clog << "warning: P@" << k << " clamped to " << codes << " codes\n";
  }
}

double auc_or_nan(const Matrix& scores, const Matrix& gold, Average mode) {
  try {
    return auc(scores, gold, mode);
  } catch (const UndefinedMetric&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

Matrix label_matrix(const std::vector<std::vector<std::size_t>>& sets, Index codes) {
  Matrix m = Matrix::Zero(static_cast<Index>(sets.size()), codes);
  for (std::size_t r = 0; r < sets.size(); ++r) {
    for (std::size_t c : sets[r]) {
      if (static_cast<Index>(c) >= codes) throw DimensionError("label index out of range");
      m(static_cast<Index>(r), static_cast<Index>(c)) = 1.0;
    }
  }
  return m;
}

double precision_at_k(const Matrix& scores, const Matrix& gold, Index k) {
  check_shapes(scores, gold, "precision_at_k");
  if (k < 1) throw std::invalid_argument("precision_at_k: K must be >= 1");
  if (k > scores.cols()) {
    warn_clamp(k, scores.cols());
    k = scores.cols();
  }
  if (scores.rows() == 0 || k == 0) return 0.0;
  std::vector<Index> order(static_cast<std::size_t>(scores.cols()));
  double total = 0;
  for (Index i = 0; i < scores.rows(); ++i) {
    std::iota(order.begin(), order.end(), Index{0});
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Index a, Index b) {
      const double sa = scores(i, a), sb = scores(i, b);
      return sa != sb ? sa > sb : a < b;
    });
    Index hits = 0;
    for (Index j = 0; j < k; ++j) hits += gold(i, order[static_cast<std::size_t>(j)]) > 0.5;
    total += static_cast<double>(hits) / static_cast<double>(k);
  }
  return total / static_cast<double>(scores.rows());
}

double f1(const Matrix& scores, const Matrix& gold, double threshold, Average mode) {
  check_shapes(scores, gold, "f1");
  if (!(threshold > 0 && threshold < 1)) {
    throw std::invalid_argument("f1: threshold must lie in (0,1)");
  }
  if (mode == Average::kMicro) {
    Counts total;
    for (Index c = 0; c < scores.cols(); ++c) {
      const Counts k = confusion(scores, gold, threshold, c);
      total.tp += k.tp;
      total.fp += k.fp;
      total.fn += k.fn;
    }
    return f1_from(total.tp, total.fp, total.fn);
  }
  double sum = 0;
  Index used = 0;
  for (Index c = 0; c < scores.cols(); ++c) {
    const Counts k = confusion(scores, gold, threshold, c);
    if (k.tp + k.fn == 0) continue;
    sum += f1_from(k.tp, k.fp, k.fn);
    ++used;
  }
  return used == 0 ? 0.0 : sum / static_cast<double>(used);
}

double auc_binary(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw DimensionError("auc: size mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0;
  double n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1..j share the midrank.
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t q = i; q < j; ++q) {
      if (positive[order[q]]) {
        rank_sum += mid;
        n_pos += 1;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetric("auc: need both classes");
  return (rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg);
}

double auc(const Matrix& scores, const Matrix& gold, Average mode) {
  check_shapes(scores, gold, "auc");
  if (mode == Average::kMicro) {
    std::vector<double> s(scores.data(), scores.data() + scores.size());
    std::vector<bool> p(static_cast<std::size_t>(gold.size()));
    for (Index i = 0; i < gold.size(); ++i) p[static_cast<std::size_t>(i)] = gold.data()[i] > 0.5;
    return auc_binary(s, p);
  }
  double sum = 0;
  Index used = 0;
  std::vector<double> s(static_cast<std::size_t>(scores.rows()));
  std::vector<bool> p(static_cast<std::size_t>(scores.rows()));
  for (Index c = 0; c < scores.cols(); ++c) {
    if (!has_both(gold, c)) continue;
    for (Index i = 0; i < scores.rows(); ++i) {
      s[static_cast<std::size_t>(i)] = scores(i, c);
      p[static_cast<std::size_t>(i)] = gold(i, c) > 0.5;
    }
    sum += auc_binary(s, p);
    ++used;
  }
  if (used == 0) throw UndefinedMetric("macro auc: no code has both classes");
  return sum / static_cast<double>(used);
}

Index f1_exclusions(const Matrix& gold) {
  Index n = 0;
  for (Index c = 0; c < gold.cols(); ++c) n += (gold.col(c).array() > 0.5).count() == 0;
  return n;
}

Index auc_exclusions(const Matrix& gold) {
  Index n = 0;
  for (Index c = 0; c < gold.cols(); ++c) n += !has_both(gold, c);
  return n;
}

LevelReport evaluate_level(const Matrix& scores, const Matrix& gold, double threshold,
                           std::size_t level) {
  check_shapes(scores, gold, "evaluate");
  LevelReport r;
  r.level = level;
  r.codes = scores.cols();
  r.records = scores.rows();
  r.macro_auc = auc_or_nan(scores, gold, Average::kMacro);
  r.micro_auc = auc_or_nan(scores, gold, Average::kMicro);
  r.macro_f1 = f1(scores, gold, threshold, Average::kMacro);
  r.micro_f1 = f1(scores, gold, threshold, Average::kMicro);
  r.p_at_5 = precision_at_k(scores, gold, 5);
  r.p_at_8 = precision_at_k(scores, gold, 8);
  r.p_at_15 = precision_at_k(scores, gold, 15);
  r.f1_excluded = f1_exclusions(gold);
  r.auc_excluded = auc_exclusions(gold);
  return r;
}

void write_tsv(std::ostream& out, const EvalReport& report) {
  out << "level\tcodes\trecords\tmacro_auc\tmicro_auc\tmacro_f1\tmicro_f1\tp@5\tp@8\tp@15"
         "\tf1_excluded\tauc_excluded\n";
  const auto old = out.precision(17);
  for (const auto& r : report.levels) {
    out << r.level << '\t' << r.codes << '\t' << r.records << '\t' << r.macro_auc << '\t'
        << r.micro_auc << '\t' << r.macro_f1 << '\t' << r.micro_f1 << '\t' << r.p_at_5 << '\t'
        << r.p_at_8 << '\t' << r.p_at_15 << '\t' << r.f1_excluded << '\t' << r.auc_excluded
        << '\n';
  }
  out.precision(old);
}

std::string format_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::size_t name_width = 5;
  for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size());
  std::ostringstream out;
  const auto pct = [&out](double v) {
    out << ' ' << std::setw(6);
    if (std::isnan(v)) {
      out << "-";
    } else {
      out << std::fixed << std::setprecision(1) << 100 * v;
    }
  };
  const std::string pad(name_width, ' ');
  out << std::left << std::setw(static_cast<int>(name_width)) << "Model" << std::right
      << "  Level |   AUC          |   F1           |   P@K\n";
  out << pad << "        |  Macro  Micro  |  Macro  Micro  |      5      8     15\n";
  for (const auto& [name, report] : rows) {
    for (const auto& r : report.levels) {
      out << std::left << std::setw(static_cast<int>(name_width)) << name << std::right
          << "  " << std::setw(5) << r.level << " |";
      pct(r.macro_auc);
      pct(r.micro_auc);
      out << "  |";
      pct(r.macro_f1);
      pct(r.micro_f1);
      out << "  |";
      pct(r.p_at_5);
      pct(r.p_at_8);
      pct(r.p_at_15);
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace hiercode
