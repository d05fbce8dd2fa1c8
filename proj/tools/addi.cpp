// tools/addi.cpp

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

// Command-line front end. Every subcommand reads an optional config file plus
// --set overrides, writes config.resolved into --out and exits with
//   0 ok, 2 config, 3 data, 4 numeric, 5 I/O.

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "addi/eval/config.hpp"
#include "addi/eval/experiment.hpp"
#include "addi/eval/report.hpp"
#include "addi/signal/extract.hpp"

namespace fs = std::filesystem;
using namespace addi;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out = "addi-out";
  long long seed = -1;
  bool quiet = false;
  bool verbose = false;
};

class Log {
 public:
  explicit Log(const Common& c) : level_(c.quiet ? 0 : (c.verbose ? 2 : 1)) {}
  void Info(const std::string& s) const {
    if (level_ >= 1) std::cerr << "addi: " << s << '\n';
  }
  void Debug(const std::string& s) const {
    if (level_ >= 2) std::cerr << "addi: " << s << '\n';
  }

 private:
  int level_;
};

void AddCommon(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "flat key = value config file");
  app->add_option("--set", c.overrides, "override KEY=VALUE (repeatable)")->take_all();
  app->add_option("--out", c.out, "output directory");
  app->add_option("--seed", c.seed, "base seed (train.seed)");
  auto* q = app->add_flag("--quiet", c.quiet, "only report errors");
  app->add_flag("--verbose", c.verbose, "log every skip and epoch")->excludes(q);
}

eval::ExperimentConfig Resolve(const Common& c) {
  auto overrides = c.overrides;
  if (c.seed >= 0) overrides.push_back("train.seed=" + std::to_string(c.seed));
  return eval::LoadExperimentConfig(c.config, overrides);
}

void PrepareOut(const Common& c, const eval::ExperimentConfig& cfg) {
  std::error_code ec;
  fs::create_directories(c.out, ec);
  Require(!ec, ErrorKind::kIo, "cannot create output directory " + c.out + ": " + ec.message());
  eval::WriteText((fs::path(c.out) / "config.resolved").string(), cfg.settings.Serialize());
}

std::string OutPath(const Common& c, const std::string& name) {
  return (fs::path(c.out) / name).string();
}

void WriteReports(const Common& c, const eval::ExperimentConfig& cfg,
                  const std::vector<eval::MetricsReport>& reports, const Log& log) {
  for (const auto& f : cfg.report_formats) {
    const auto format = eval::ParseReportFormat(f);
    const auto path = OutPath(c, std::string("report.") + eval::ReportExtension(format));
    eval::EmitReport(reports, format, path);
    log.Debug("wrote " + path);
  }
  if (!c.quiet) std::cout << eval::FormatTable(reports);
}

std::ofstream OpenLog(const Common& c, const std::string& name) {
  std::ofstream os(OutPath(c, name), std::ios::trunc);
  Require(static_cast<bool>(os), ErrorKind::kIo, "cannot write " + OutPath(c, name));
  return os;
}

eval::DataBundle Load(const eval::ExperimentConfig& cfg, const Log& log) {
  auto d = eval::LoadData(cfg);
  for (const auto& w : d.warnings) log.Info("warning: " + w);
  log.Debug("data: " + std::to_string(d.source.size()) + " source, " +
            std::to_string(d.target.size()) + " target, " + std::to_string(d.unlabelled.size()) +
            " unlabelled, " + std::to_string(d.n_mels) + "x" + std::to_string(d.n_frames));
  return d;
}

eval::ExperimentConfig WithFrames(eval::ExperimentConfig cfg, const eval::DataBundle& d) {
  cfg.arch.n_mels = d.n_mels;
  cfg.arch.n_frames = d.n_frames;
  return cfg;
}

int RunExtract(const Common& c, const std::vector<std::string>& manifests) {
  Log log(c);
  auto cfg = Resolve(c);
  PrepareOut(c, cfg);
  const char* env = std::getenv("ADDI_CACHE_DIR");
  const std::string cache = env && *env ? std::string(env) : OutPath(c, "cache");
  for (const auto& m : manifests) {
    const auto out = OutPath(c, fs::path(m).stem().string() + ".features.tsv");
    auto summary = signal::ExtractManifest(m, cache, out, {},
                                           [&](const std::string& s) { log.Info(s); });
    log.Info(m + ": " + std::to_string(summary.computed) + " extracted, " +
             std::to_string(summary.reused) + " reused from " + cache + " -> " + out);
  }
  return 0;
}

int RunTrain(const Common& c, bool save_models) {
  Log log(c);
  auto cfg = Resolve(c);
  PrepareOut(c, cfg);
  auto d = Load(cfg, log);
  auto curve = OpenLog(c, "train.jsonl");
  eval::RunHooks hooks;
  hooks.log = &curve;
  if (save_models) {
    hooks.on_model = [&](int i, model::AddiModel<eval::Scalar>& m) {
      ad::WriteCheckpoint(OutPath(c, "model." + std::to_string(i) + ".ckpt"),
                          ad::MakeCheckpoint(m.params()));
    };
  }
  auto rep = eval::RunExperiment(cfg, d, hooks);
  rep.training_log = OutPath(c, "train.jsonl");
  WriteReports(c, cfg, {rep}, log);
  return 0;
}

int RunAblate(const Common& c, const std::vector<int>& ids) {
  Log log(c);
  auto cfg = Resolve(c);
  PrepareOut(c, cfg);
  auto d = Load(cfg, log);
  std::vector<eval::MetricsReport> reports;
  for (int id : ids) {
    auto variant = eval::AblationConfig(cfg, id);
    auto curve = OpenLog(c, "train.model" + std::to_string(id) + ".jsonl");
    eval::RunHooks hooks;
    hooks.log = &curve;
    auto rep = eval::RunExperiment(variant, d, hooks);
    rep.training_log = OutPath(c, "train.model" + std::to_string(id) + ".jsonl");
    log.Info(rep.name + ": UAR " + std::to_string(100.0 * rep.mean) + " +- " +
             std::to_string(100.0 * rep.std));
    reports.push_back(std::move(rep));
  }
  WriteReports(c, cfg, reports, log);
  return 0;
}

int RunSweep(const Common& c) {
  Log log(c);
  auto cfg = Resolve(c);
  PrepareOut(c, cfg);
  auto d = Load(cfg, log);
  auto curve = OpenLog(c, "train.jsonl");
  eval::RunHooks hooks;
  hooks.log = &curve;
  auto reports = eval::FractionSweep(cfg, d, cfg.sweep_axis, cfg.sweep_grid, hooks);
  for (auto& r : reports) r.training_log = OutPath(c, "train.jsonl");
  WriteReports(c, cfg, reports, log);
  return 0;
}

int RunPretrain(const Common& c) {
  Log log(c);
  auto cfg = Resolve(c);
  Require(cfg.pretrain != eval::PretrainMode::kNone, ErrorKind::kConfig,
          "pretrain needs pretrain.mode = reconstruction or synthetic_generation");
  PrepareOut(c, cfg);
  auto d = Load(cfg, log);
  cfg = WithFrames(cfg, d);
  auto curve = OpenLog(c, "pretrain.jsonl");
  auto r = eval::Pretrain(cfg, d.unlabelled, DeriveSeed(cfg.seed, "pretrain"), &curve);
  ad::WriteCheckpoint(OutPath(c, "pretext.ckpt"), ad::MakeCheckpoint(r.model.params()));
  ad::WriteCheckpoint(OutPath(c, "encoder.ckpt"), pretext::ExportEncoder(r.model));
  for (std::size_t e = 0; e < r.fake_prob.size(); ++e) {
    log.Debug("epoch " + std::to_string(e) + ": mean fake-class probability " +
              std::to_string(r.fake_prob[e]));
  }
  log.Info("wrote " + OutPath(c, "encoder.ckpt"));
  return 0;
}

int RunSynth(const Common& c, const std::string& checkpoint, long count) {
  Log log(c);
  auto cfg = Resolve(c);
  PrepareOut(c, cfg);
  auto d = Load(cfg, log);
  cfg = WithFrames(cfg, d);
  pretext::PretextModel<eval::Scalar> m(cfg.arch, DeriveSeed(cfg.seed, "pretrain"));
  ad::LoadParameters(ad::ReadCheckpoint(checkpoint), m.params());
  auto samples = pretext::GenerateSynthetic(m, count, {}, DeriveSeed(cfg.seed, "synthesis"));
  pretext::WriteSyntheticSet(OutPath(c, "synthetic"), samples);
  log.Info("wrote " + std::to_string(samples.size()) + " samples to " + OutPath(c, "synthetic"));
  return 0;
}

int RunEvaluate(const Common& c, const std::string& checkpoint, int repeat, bool whole) {
  Log log(c);
  auto cfg = Resolve(c);
  PrepareOut(c, cfg);
  auto d = Load(cfg, log);
  cfg = WithFrames(cfg, d);
  const auto seed = eval::RepeatSeed(cfg, repeat);
  model::AddiModel<eval::Scalar> m(cfg.arch, model::AblationComponents(cfg.ablation),
                                   DeriveSeed(seed, "init"));
  ad::LoadParameters(ad::ReadCheckpoint(checkpoint), m.params());
  auto vocab = eval::VocabularyFor(cfg);
  const auto items = whole ? d.target : eval::MakeSeedSplit(cfg, d, seed).target_test;
  auto pred = eval::Predict(m, items, vocab ? &*vocab : nullptr);
  eval::MetricsReport rep;
  rep.name = cfg.report_name.empty() ? cfg.Name() : cfg.report_name;
  rep.fingerprint = cfg.settings.Fingerprint();
  eval::SeedResult r;
  r.seed = seed;
  r.uar = eval::Uar(pred.predicted, pred.labels);
  r.recalls = eval::PerClassRecall(pred.predicted, pred.labels);
  rep.runs.push_back(r);
  eval::Aggregate(rep);
  WriteReports(c, cfg, {rep}, log);
  return 0;
}

int RunReport(const Common& c, const std::vector<std::string>& inputs) {
  Log log(c);
  auto cfg = Resolve(c);
  PrepareOut(c, cfg);
  std::vector<eval::MetricsReport> all;
  for (const auto& path : inputs) {
    std::ifstream is(path);
    Require(static_cast<bool>(is), ErrorKind::kIo, "cannot read report " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    for (auto& r : eval::ReportsFromJson(ss.str())) all.push_back(std::move(r));
  }
  WriteReports(c, cfg, all, log);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"addi: adversarial dual-discriminator domain adaptation lab"};
  app.require_subcommand(1);
  Common c;

  std::vector<std::string> manifests;
  auto* extract = app.add_subcommand("extract", "compute cached log-mel features for audio manifests");
  AddCommon(extract, c);
  extract->add_option("manifests", manifests, "audio manifests")->required();

  auto* pretrain = app.add_subcommand("pretrain", "train the pretext model and export its encoder");
  AddCommon(pretrain, c);

  bool save = false;
  auto* train = app.add_subcommand("train", "run the repeat protocol for one model variant");
  AddCommon(train, c);
  train->add_flag("--save-models", save, "write one checkpoint per repeat");

  std::string checkpoint;
  int repeat = 0;
  bool whole = false;
  auto* evaluate = app.add_subcommand("evaluate", "score a trained checkpoint on target data");
  AddCommon(evaluate, c);
  evaluate->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  evaluate->add_option("--repeat", repeat, "repeat index whose test split is scored");
  evaluate->add_flag("--all", whole, "score the whole target corpus");

  std::vector<int> ids{1, 2, 3, 4, 5};
  auto* ablate = app.add_subcommand("ablate", "run the ablation ladder");
  AddCommon(ablate, c);
  ablate->add_option("--models", ids, "model ids 1..5")->delimiter(',');

  long count = 0;
  auto* synth = app.add_subcommand("synth", "generate a synthetic labelled set from a pretext model");
  AddCommon(synth, c);
  synth->add_option("--checkpoint", checkpoint, "pretext checkpoint")->required();
  synth->add_option("--count", count, "number of samples")->required();

  auto* sweep = app.add_subcommand("sweep", "fraction sweep along sweep.axis over sweep.grid");
  AddCommon(sweep, c);

  std::vector<std::string> inputs;
  auto* report = app.add_subcommand("report", "merge JSON reports and emit them in every format");
  AddCommon(report, c);
  report->add_option("inputs", inputs, "report.json files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*extract) return RunExtract(c, manifests);
    if (*pretrain) return RunPretrain(c);
    if (*train) return RunTrain(c, save);
    if (*evaluate) return RunEvaluate(c, checkpoint, repeat, whole);
    if (*ablate) return RunAblate(c, ids);
    if (*synth) return RunSynth(c, checkpoint, count);
    if (*sweep) return RunSweep(c);
    if (*report) return RunReport(c, inputs);
  } catch (const Error& e) {
    std::cerr << "addi: " << e.what() << '\n';
    return ExitCodeFor(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "addi: io error: " << e.what() << '\n';
    return ExitCodeFor(ErrorKind::kIo);
  } catch (const std::exception& e) {
    std::cerr << "addi: internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
