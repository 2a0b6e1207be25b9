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

#include "hiercode/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace hiercode {
namespace {

constexpr char kMagic[8] = {'H', 'I', 'E', 'R', 'C', 'O', 'D', 'E'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u64(std::uint64_t v) {
    std::array<char, 8> b;
    for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(b.data(), 8);
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void matrix(const Matrix& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint64_t u64() {
    std::array<unsigned char, 8> b;
    in_.read(reinterpret_cast<char*>(b.data()), 8);
    if (!in_) throw CheckpointError("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u64();
    if (n > (1ULL << 32)) throw CheckpointError("checkpoint string length out of range");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) throw CheckpointError("checkpoint truncated");
    return s;
  }
  Matrix matrix() {
    const auto r = static_cast<Index>(u64());
    const auto c = static_cast<Index>(u64());
    if (r < 0 || c < 0 || r * c > (Index{1} << 32)) throw CheckpointError("matrix size out of range");
    Matrix m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
    return m;
  }

 private:
  std::istream& in_;
};

void write_report(Writer& w, const LevelReport& r) {
  w.u64(r.level);
  w.u64(static_cast<std::uint64_t>(r.codes));
  w.u64(static_cast<std::uint64_t>(r.records));
  for (double v : {r.macro_auc, r.micro_auc, r.macro_f1, r.micro_f1, r.p_at_5, r.p_at_8, r.p_at_15}) {
    w.f64(v);
  }
  w.u64(static_cast<std::uint64_t>(r.f1_excluded));
  w.u64(static_cast<std::uint64_t>(r.auc_excluded));
}

LevelReport read_report(Reader& rd) {
  LevelReport r;
  r.level = rd.u64();
  r.codes = static_cast<Index>(rd.u64());
  r.records = static_cast<Index>(rd.u64());
  for (double* v : {&r.macro_auc, &r.micro_auc, &r.macro_f1, &r.micro_f1, &r.p_at_5, &r.p_at_8,
                    &r.p_at_15}) {
    *v = rd.f64();
  }
  r.f1_excluded = static_cast<Index>(rd.u64());
  r.auc_excluded = static_cast<Index>(rd.u64());
  return r;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const TrainConfig& train, std::size_t epoch, double best_micro_f1,
                     const EvalReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  Writer w(out);
  out.write(kMagic, sizeof kMagic);
  w.u64(kCheckpointVersion);
  w.str(to_config_text(model.config(), train));
  w.u64(model.vocab().digest());
  w.u64(model.hierarchy().digest());

  w.u64(static_cast<std::uint64_t>(model.vocab().size()));
  for (const auto& tok : model.vocab().tokens()) w.str(tok);

  const Hierarchy& h = model.hierarchy();
  w.u64(h.depth());
  for (std::size_t t = 0; t < h.depth(); ++t) {
    w.u64(h.level(t).size());
    for (std::size_t i = 0; i < h.level(t).size(); ++i) {
      w.str(h.level(t)[i].code);
      w.u64(static_cast<std::uint64_t>(h.level(t)[i].kind));
      w.u64(t == 0 ? 0 : h.parent(t, i));
    }
  }
  w.u64(h.descriptors().size());
  for (const auto& [code, text] : h.descriptors()) {
    w.str(code);
    w.str(text);
  }

  w.u64(model.propagation().size());
  for (const auto& p : model.propagation()) w.matrix(p);

  w.u64(model.parameters().size());
  for (const auto& p : model.parameters()) {
    w.str(p.name);
    w.matrix(p.tensor.value());
  }

  w.u64(epoch);
  w.f64(best_micro_f1);
  w.u64(report.levels.size());
  for (const auto& r : report.levels) write_report(w, r);
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw CheckpointError(path.string() + " is not a checkpoint");
  }
  Reader rd(in);
  if (auto v = rd.u64(); v != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(v));
  }
  ModelConfig config;
  Checkpoint ck;
  parse_config_text(rd.str(), config, ck.train);
  const auto vocab_digest = rd.u64();
  const auto hierarchy_digest = rd.u64();

  std::vector<std::string> tokens(rd.u64());
  for (auto& t : tokens) t = rd.str();
  Vocabulary vocab = Vocabulary::from_tokens(std::move(tokens));

  std::vector<std::vector<CodeId>> levels(rd.u64());
  std::vector<std::vector<std::size_t>> parents(levels.size());
  for (std::size_t t = 0; t < levels.size(); ++t) {
    const auto n = rd.u64();
    for (std::uint64_t i = 0; i < n; ++i) {
      CodeId c;
      c.code = rd.str();
      const auto kind = rd.u64();
      if (kind > static_cast<std::uint64_t>(CodeKind::kBlock)) throw CheckpointError("bad code kind");
      c.kind = static_cast<CodeKind>(kind);
      levels[t].push_back(std::move(c));
      parents[t].push_back(rd.u64());
    }
  }
  Hierarchy h = Hierarchy::assemble(std::move(levels), std::move(parents));
  std::map<std::string, std::string> descriptors;
  for (auto n = rd.u64(); n > 0; --n) {
    std::string code = rd.str();
    descriptors[code] = rd.str();
  }
  h.set_descriptors(std::move(descriptors));
  if (vocab.digest() != vocab_digest || h.digest() != hierarchy_digest) {
    throw CheckpointError("checkpoint vocabulary or hierarchy digest mismatch");
  }

  std::vector<Matrix> propagation(rd.u64());
  for (auto& p : propagation) p = rd.matrix();

  ck.model = std::make_unique<Model>(config, std::move(vocab), std::move(h),
                                     std::move(propagation), ck.train.seed);
  const auto& params = ck.model->parameters();
  if (rd.u64() != params.size()) throw CheckpointError("checkpoint parameter count mismatch");
  for (const auto& p : params) {
    const std::string name = rd.str();
    Matrix value = rd.matrix();
    if (name != p.name || value.rows() != p.tensor.rows() || value.cols() != p.tensor.cols()) {
      throw CheckpointError("checkpoint parameter '" + name + "' does not match model parameter '" +
                            p.name + "' " + p.tensor.shape_string());
    }
    p.tensor.mutable_value() = std::move(value);
  }

  ck.epoch = rd.u64();
  ck.best_micro_f1 = rd.f64();
  for (auto n = rd.u64(); n > 0; --n) ck.report.levels.push_back(read_report(rd));
  return ck;
}

}  // namespace hiercode
