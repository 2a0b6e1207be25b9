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

// Single-file checkpoint. All integers are little-endian u64 and all reals
// little-endian IEEE-754 binary64; strings are a u64 byte length followed by
// the bytes.
//
//   magic "HIERCODE" (8 bytes), u64 version (= 1)
//   string  config             key=value lines (model + training)
//   u64     vocab digest, u64 hierarchy digest
//   u64 n   then n vocabulary tokens
//   u64 T   then per level: u64 n, then n × (string code, u64 kind, u64 parent)
//   u64 n   then n × (string code, string descriptor text)
//   u64 T'  then T' propagation matrices
//   u64 n   then n × (string name, matrix)
//   u64     best epoch, f64 best validation micro-F1
//   u64 T   then T validation level reports
//
// A matrix is u64 rows, u64 cols, rows·cols reals in row-major order. A level
// report is u64 level, codes, records, f64 macro_auc, micro_auc, macro_f1,
// micro_f1, p@5, p@8, p@15, u64 f1_excluded, auc_excluded.

#pragma once

#include <filesystem>
#include <memory>

#include "hiercode/metrics.hpp"
#include "hiercode/model.hpp"
#include "hiercode/trainer.hpp"

namespace hiercode {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kCheckpointVersion = 1;

struct Checkpoint {
  std::unique_ptr<Model> model;
  TrainConfig train;
  std::size_t epoch = 0;
  double best_micro_f1 = 0;
  EvalReport report;  // validation metrics at save time
};

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const TrainConfig& train, std::size_t epoch, double best_micro_f1,
                     const EvalReport& report);

// Rebuilds the model and restores every parameter bit-exactly. Throws
// CheckpointError on a bad magic, version, digest or parameter layout.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hiercode
