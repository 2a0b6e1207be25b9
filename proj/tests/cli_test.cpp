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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hiercode/checkpoint.hpp"

namespace hiercode {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr folded into the captured output.
Result run(const std::string& args) {
  const std::string cmd = std::string(HIERCODE_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  while (std::fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSmallModel =
    " --embed-dim 6 --kernel-widths 3,5 --conv-dim 6 --res-dim 3 --gcn-hidden 4"
    " --attention-dim 4 --dependency-dim 3 --batch-size 8 --lr 0.01";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("hiercode_cli_" + std::string(
        ::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string p(const std::string& name) const { return (dir / name).string(); }
  Result synth(const std::string& extra = "") {
    return run("synth --seed 7 --train-docs 24 --valid-docs 8 --out-dir " + dir.string() + extra);
  }
  std::string corpus_flags() const {
    return " --train " + p("train.jsonl") + " --valid " + p("valid.jsonl") + " --descriptors " +
           p("descriptors.tsv");
  }
  fs::path dir;
};

TEST_F(Cli, UnknownFlagPrintsUsageAndExitsTwo) {
  const Result r = run("train --no-such-flag");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("Usage"), std::string::npos);
  EXPECT_EQ(run("frobnicate").code, 2);
}

TEST_F(Cli, HelpExitsZero) {
  const Result r = run("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* sub : {"synth", "build-hierarchy", "build-cograph", "train", "evaluate", "predict", "gradcheck"}) {
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
  }
}

TEST_F(Cli, MissingInputFileExitsNonzero) {
  EXPECT_NE(run("train --train " + p("nope.jsonl") + " --valid " + p("nope.jsonl")).code, 0);
}

TEST_F(Cli, GradcheckToy) {
  const Result r = run("gradcheck --toy");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("max relative error"), std::string::npos) << r.out;
}

TEST_F(Cli, SynthIsDeterministic) {
  ASSERT_EQ(synth().code, 0);
  const std::string first = slurp(dir / "train.jsonl");
  ASSERT_EQ(synth().code, 0);
  EXPECT_EQ(slurp(dir / "train.jsonl"), first);
  EXPECT_FALSE(first.empty());
}

TEST_F(Cli, SynthTrainEvaluatePipeline) {
  ASSERT_EQ(synth().code, 0);
  const Result tr = run("train" + corpus_flags() + kSmallModel + " --max-epochs 3 --log " + p("log.csv") +
                        " --out " + p("model.ckpt"));
  ASSERT_EQ(tr.code, 0) << tr.out;
  EXPECT_TRUE(fs::exists(dir / "model.ckpt"));
  const std::string log = slurp(dir / "log.csv");
  EXPECT_NE(log.find("epoch,split,level"), std::string::npos);
  EXPECT_NE(log.find("3,valid,3,"), std::string::npos) << log;

  const Result ev = run("evaluate --check --checkpoint " + p("model.ckpt") + " --corpus " + p("valid.jsonl") +
                        " --tsv " + p("report.tsv"));
  EXPECT_EQ(ev.code, 0) << ev.out;
  const std::string tsv = slurp(dir / "report.tsv");
  EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 4);  // header and three levels

  // Evaluating a different split cannot match the stored validation report.
  EXPECT_EQ(run("evaluate --check --checkpoint " + p("model.ckpt") + " --corpus " + p("train.jsonl")).code, 1);

  const Result pr = run("predict --top-k 2 --checkpoint " + p("model.ckpt") + " --corpus " + p("valid.jsonl") +
                        " --out " + p("pred.tsv"));
  EXPECT_EQ(pr.code, 0) << pr.out;
  const std::string pred = slurp(dir / "pred.tsv");
  EXPECT_EQ(std::count(pred.begin(), pred.end(), '\n'), 8 * 3 * 2);
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
  ASSERT_EQ(synth().code, 0);
  std::ofstream(dir / "run.conf") << "# desk run\nmax-epochs = 1\nembed_dim=6\nkernel_widths=3\nconv_dim=6\n"
                                     "res_dim=3\ngcn_hidden=4\nattention_dim=4\ndependency_dim=3\nlr=0.5\n";
  const Result r = run("train" + corpus_flags() + " --config " + p("run.conf") + " --lr 0.01 --out " +
                       p("m.ckpt") + " --log " + p("log.csv"));
  ASSERT_EQ(r.code, 0) << r.out;
  const Checkpoint ck = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(ck.train.learning_rate, 0.01);
  EXPECT_EQ(ck.train.max_epochs, 1u);
  EXPECT_EQ(ck.model->config().encoder.embed_dim, 6);
  std::ofstream(dir / "bad.conf") << "no_such_key=1\n";
  EXPECT_EQ(run("train" + corpus_flags() + " --config " + p("bad.conf")).code, 1);
}

TEST_F(Cli, AblationSwitches) {
  ASSERT_EQ(synth().code, 0);
  const std::string common = corpus_flags() + kSmallModel + " --max-epochs 1 --log " + p("log.csv");
  ASSERT_EQ(run("train" + common + " --no-orl --out " + p("orl.ckpt")).code, 0);
  ASSERT_EQ(run("train" + common + " --no-hpl --out " + p("hpl.ckpt")).code, 0);
  ASSERT_EQ(run("train" + common + " --levels 2 --out " + p("two.ckpt")).code, 0);
  const Checkpoint orl = load_checkpoint(dir / "orl.ckpt");
  EXPECT_FALSE(orl.model->config().use_gcn);
  for (const auto& prm : orl.model->parameters()) EXPECT_NE(prm.name.rfind("gcn.", 0), 0u);
  EXPECT_EQ(load_checkpoint(dir / "hpl.ckpt").model->depth(), 1u);
  EXPECT_EQ(load_checkpoint(dir / "two.ckpt").model->depth(), 2u);
}

TEST_F(Cli, BuildHierarchyAndCograph) {
  ASSERT_EQ(synth(" --planted 0 1 2 3").code, 0);
  ASSERT_EQ(run("build-hierarchy --corpus " + p("train.jsonl") + " --depth 3 --out " + p("h.tsv")).code, 0);
  const Result bc = run("build-cograph --corpus " + p("train.jsonl") + " --hierarchy " + p("h.tsv") + " --out " +
                        p("g.tsv"));
  ASSERT_EQ(bc.code, 0) << bc.out;
  const std::string g = slurp(dir / "g.tsv");
  EXPECT_NE(g.find("\t0.66666666666666663\n"), std::string::npos);
  EXPECT_EQ(run("build-hierarchy --corpus " + p("train.jsonl") + " --depth 4 --out " + p("h4.tsv")).code, 1);
  EXPECT_EQ(run("build-hierarchy --icd9-blocks --corpus " + p("train.jsonl") + " --depth 4 --out " + p("h4.tsv")).code,
            0);
}

TEST_F(Cli, SweepLevelsPrintsComparisonTable) {
  ASSERT_EQ(synth().code, 0);
  const Result r = run("sweep-levels --counts 1,2" + corpus_flags() + kSmallModel + " --max-epochs 1 --log " +
                       p("log.csv"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("T=1"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("T=2"), std::string::npos) << r.out;
}

}  // namespace
}  // namespace hiercode
