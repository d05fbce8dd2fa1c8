// tests/cli_test.cpp

// Copyright 2026  addilab authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Runs the addi binary as a child process: the ADDI_CLI_PATH environment
// variable if set, else the path compiled in by the build.

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "addi/signal/wav.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string output;  // stdout and stderr interleaved
};

fs::path Scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("addi_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

Result Addi(const std::string& args, const std::string& env = "") {
  const char* bin = std::getenv("ADDI_CLI_PATH");
#ifdef ADDI_CLI_PATH
  if (!bin) bin = ADDI_CLI_PATH;
#endif
  EXPECT_NE(bin, nullptr) << "ADDI_CLI_PATH is not set";
  if (!bin) return {};
  const auto log = fs::temp_directory_path() / "addi_cli_output.txt";
  const std::string cmd = env + " '" + bin + "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::stringstream ss;
  ss << std::ifstream(log).rdbuf();
  r.output = ss.str();
  return r;
}

std::string Slurp(const fs::path& p) {
  std::stringstream ss;
  ss << std::ifstream(p, std::ios::binary).rdbuf();
  return ss.str();
}

const std::string kTiny =
    " --set toy.n_source=48 --set toy.n_target=48 --set toy.n_unlabelled=16"
    " --set model.conv_channels=2,3 --set model.conv_kernels=3,3 --set model.latent=6"
    " --set model.hidden=5,4 --set train.seeds=2 --set train.max_epochs=2"
    " --set train.batch_size=8 --set train.lr=0.001 --set pretrain.epochs=1"
    " --set pretrain.batch_size=8";

TEST(Cli, UnknownKeyIsConfigError) {
  const auto out = Scratch("unknown");
  auto r = Addi("train --out '" + out.string() + "' --set train.lambda=0.5");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("train.lambda"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("config error"), std::string::npos) << r.output;

  std::ofstream(out / "bad.cfg") << "train.seeds = 2\nmodel.widgets = 3\n";
  r = Addi("train --config '" + (out / "bad.cfg").string() + "'");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("model.widgets"), std::string::npos) << r.output;
}

TEST(Cli, ExitCodesByCategory) {
  const auto dir = Scratch("codes");
  EXPECT_EQ(Addi("").code, 2);
  EXPECT_EQ(Addi("frobnicate").code, 2);
  EXPECT_EQ(Addi("train --set train.seeds=many").code, 2);
  EXPECT_EQ(Addi("train --out '" + dir.string() + "' --set data.source=/nonexistent.tsv").code, 2);

  std::ofstream(dir / "broken.tsv") << "u1\tonly-two-fields\n";
  auto r = Addi("train --out '" + (dir / "o").string() + "' --set data.source=" +
               (dir / "broken.tsv").string());
  EXPECT_EQ(r.code, 3) << r.output;

  std::ofstream(dir / "plain_file") << "x";
  r = Addi("train --out '" + (dir / "plain_file" / "sub").string() + "'" + kTiny);
  EXPECT_EQ(r.code, 5) << r.output;
}

TEST(Cli, TrainBaselineWritesReportsAndSnapshot) {
  const auto out = Scratch("train5");
  auto r = Addi("train --quiet --out '" + out.string() + "' --set model.ablation=5" + kTiny);
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* f : {"config.resolved", "report.json", "report.csv", "report.txt", "train.jsonl"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_NE(Slurp(out / "config.resolved").find("model.ablation = 5"), std::string::npos);
  const auto j = nlohmann::json::parse(Slurp(out / "report.json"));
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["name"], "CNN");
  EXPECT_EQ(j[0]["runs"].size(), 2u);
  const auto csv = Slurp(out / "report.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Cli, SnapshotReplayIsBitIdentical) {
  const auto a = Scratch("replay_a"), b = Scratch("replay_b");
  ASSERT_EQ(Addi("train --quiet --seed 5 --out '" + a.string() + "'" + kTiny).code, 0);
  ASSERT_EQ(Addi("train --quiet --config '" + (a / "config.resolved").string() + "' --out '" +
                b.string() + "'")
                .code,
            0);
  EXPECT_EQ(Slurp(a / "config.resolved"), Slurp(b / "config.resolved"));
  EXPECT_EQ(Slurp(a / "report.csv"), Slurp(b / "report.csv"));
  EXPECT_EQ(Slurp(a / "train.jsonl"), Slurp(b / "train.jsonl"));
  EXPECT_NE(Slurp(a / "config.resolved").find("train.seed = 5"), std::string::npos);
}

TEST(Cli, PretrainTrainEvaluateSynthChain) {
  const auto out = Scratch("chain");
  const std::string base = " --quiet" + kTiny + " --set pretrain.mode=synthetic_generation";
  ASSERT_EQ(Addi("pretrain --out '" + (out / "pre").string() + "'" + base).code, 0);
  ASSERT_TRUE(fs::exists(out / "pre" / "encoder.ckpt"));
  auto r = Addi("train --save-models --out '" + (out / "tr").string() + "'" + base +
               " --set pretrain.encoder=" + (out / "pre" / "encoder.ckpt").string());
  ASSERT_EQ(r.code, 0) << r.output;
  ASSERT_TRUE(fs::exists(out / "tr" / "model.1.ckpt"));
  r = Addi("evaluate --repeat 1 --checkpoint '" + (out / "tr" / "model.1.ckpt").string() +
          "' --out '" + (out / "ev").string() + "'" + base);
  ASSERT_EQ(r.code, 0) << r.output;
  // Scoring the saved model on its own test split reproduces the train report.
  const auto tr = nlohmann::json::parse(Slurp(out / "tr" / "report.json"));
  const auto ev = nlohmann::json::parse(Slurp(out / "ev" / "report.json"));
  EXPECT_EQ(ev[0]["runs"][0]["uar"], tr[0]["runs"][1]["uar"]);

  r = Addi("synth --count 12 --checkpoint '" + (out / "pre" / "pretext.ckpt").string() +
          "' --out '" + (out / "syn").string() + "'" + base);
  ASSERT_EQ(r.code, 0) << r.output;
  const auto manifest = Slurp(out / "syn" / "synthetic" / "manifest.tsv");
  EXPECT_EQ(std::count(manifest.begin(), manifest.end(), '\n'), 12);
  EXPECT_EQ(Addi("synth --count 0 --checkpoint '" + (out / "pre" / "pretext.ckpt").string() +
                "' --out '" + (out / "syn0").string() + "'" + base)
                .code,
            2);

  r = Addi("report --out '" + (out / "rep").string() + "' '" + (out / "tr" / "report.json").string() +
          "' '" + (out / "ev" / "report.json").string() + "'");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(nlohmann::json::parse(Slurp(out / "rep" / "report.json")).size(), 2u);
}

TEST(Cli, AblateAndSweep) {
  const auto out = Scratch("ladder");
  auto r = Addi("ablate --quiet --models 5,1 --out '" + (out / "ab").string() + "'" + kTiny +
               " --set train.seeds=1");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto j = nlohmann::json::parse(Slurp(out / "ab" / "report.json"));
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0]["name"], "CNN");
  EXPECT_EQ(j[1]["name"], "ADDi");
  r = Addi("sweep --quiet --out '" + (out / "sw").string() + "'" + kTiny +
          " --set train.seeds=1 --set sweep.grid=0,1");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto s = nlohmann::json::parse(Slurp(out / "sw" / "report.json"));
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0]["runs"][0]["seed"], s[1]["runs"][0]["seed"]);
  EXPECT_EQ(Addi("ablate --models 7 --out '" + (out / "bad").string() + "'" + kTiny).code, 2);
}

TEST(Cli, ExtractTwiceIsCachedNoOp) {
  const auto dir = Scratch("extract");
  const char* labels[] = {"angry", "happy", "sad", "neutral"};
  {
    std::ofstream m(dir / "audio.tsv");
    for (int i = 0; i < 16; ++i) {
      addi::signal::AudioClip c;
      c.samples.resize(4800);
      for (std::size_t k = 0; k < c.samples.size(); ++k)
        c.samples[k] = (0.3 + 0.01 * i) * std::sin(2.0 * M_PI * (300.0 + 500.0 * (i % 4)) * double(k) / 16000.0);
      const std::string id = "u" + std::to_string(i);
      addi::signal::WriteWav((dir / (id + ".wav")).string(), c);
      m << id << '\t' << id << ".wav\tcorpA\t0\tcategorical\t" << labels[i % 4] << "\tlangA\n";
    }
  }
  const std::string cmd = "extract --out '" + (dir / "out").string() + "' '" +
                          (dir / "audio.tsv").string() + "'";
  const std::string env = "ADDI_CACHE_DIR='" + (dir / "cache").string() + "'";
  auto r = Addi(cmd, env);
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("16 extracted, 0 reused"), std::string::npos) << r.output;
  const auto manifest = dir / "out" / "audio.features.tsv";
  const auto first = Slurp(manifest);
  std::map<std::string, std::pair<std::string, fs::file_time_type>> cache;
  for (const auto& e : fs::directory_iterator(dir / "cache"))
    cache[e.path().string()] = {Slurp(e.path()), e.last_write_time()};
  ASSERT_EQ(cache.size(), 16u);

  r = Addi(cmd, env);
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("skip u0: cached at"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("0 extracted, 16 reused"), std::string::npos) << r.output;
  EXPECT_EQ(Slurp(manifest), first);
  for (const auto& e : fs::directory_iterator(dir / "cache")) {
    const auto& [bytes, stamp] = cache.at(e.path().string());
    EXPECT_EQ(Slurp(e.path()), bytes);
    EXPECT_EQ(e.last_write_time(), stamp);
  }

  // The extracted manifest drives training directly.
  r = Addi("train --quiet --out '" + (dir / "tr").string() + "'" + kTiny +
          " --set data.source=" + manifest.string() + " --set data.target=" + manifest.string() +
          " --set data.unlabelled= --set train.seeds=1");
  EXPECT_EQ(r.code, 0) << r.output;
}

}  // namespace
