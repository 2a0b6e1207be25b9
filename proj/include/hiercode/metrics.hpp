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

// Multi-label evaluation. Scores and gold labels are N×C matrices (records
// by codes); gold entries are 0 or 1.

#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "hiercode/tensor.hpp"

namespace hiercode {

struct UndefinedMetric : std::domain_error {
  using std::domain_error::domain_error;
};

enum class Average { kMicro, kMacro };

// Dense 0/1 label matrix from per-record sorted index sets.
Matrix label_matrix(const std::vector<std::vector<std::size_t>>& sets, Index codes);

// Mean over records of |top-K ∩ gold| / K. Equal scores rank the lower code
// index first. K above the code count is clamped with a warning.
double precision_at_k(const Matrix& scores, const Matrix& gold, Index k);

// Decisions are score >= threshold. Per-code F1 is 0 when TP+FP+FN = 0;
// the macro mean covers only codes with at least one gold positive.
double f1(const Matrix& scores, const Matrix& gold, double threshold, Average mode);

// ROC-AUC from the Mann-Whitney statistic with tie midranks. Macro averages
// over codes that have both classes. Throws UndefinedMetric when no code
// (macro) or the pooled pairs (micro) lack either class.
double auc(const Matrix& scores, const Matrix& gold, Average mode);

// Single-list AUC over parallel score/label vectors.
double auc_binary(const std::vector<double>& scores, const std::vector<bool>& positive);

// Codes excluded from macro F1 (no gold positive) and macro AUC (one class).
Index f1_exclusions(const Matrix& gold);
Index auc_exclusions(const Matrix& gold);

struct LevelReport {
  std::size_t level = 0;  // 1-based, coarse to fine
  Index codes = 0;
  Index records = 0;
  // NaN when the metric is undefined for this split (see auc()).
  double macro_auc = 0;
  double micro_auc = 0;
  double macro_f1 = 0;
  double micro_f1 = 0;
  double p_at_5 = 0;
  double p_at_8 = 0;
  double p_at_15 = 0;
  Index f1_excluded = 0;
  Index auc_excluded = 0;
};

struct EvalReport {
  std::vector<LevelReport> levels;
  const LevelReport& final_level() const { return levels.back(); }
};

LevelReport evaluate_level(const Matrix& scores, const Matrix& gold, double threshold,
                           std::size_t level);

// One row per level:
// level codes records macro_auc micro_auc macro_f1 micro_f1 p@5 p@8 p@15 f1_excluded auc_excluded
void write_tsv(std::ostream& out, const EvalReport& report);

// Fixed-width block: AUC (macro, micro), F1 (macro, micro), P@5/8/15, in
// percent, one row per level, labelled by `name`.
std::string format_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

}  // namespace hiercode
