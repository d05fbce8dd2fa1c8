// tests/eval_test.cpp

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

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "addi/eval/config.hpp"
#include "addi/eval/experiment.hpp"
#include "addi/eval/metrics.hpp"
#include "addi/eval/report.hpp"
#include "addi/eval/schedule.hpp"

namespace addi::eval {
namespace {

ErrorKind KindOf(const std::function<void()>& f, std::string* what = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (what) *what = e.what();
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kInvalidInput;
}

// --- UAR -------------------------------------------------------------------------

TEST(Uar, Examples) {
  EXPECT_EQ(Uar({0, 1, 2, 3}, {0, 1, 2, 3}), 1.0);
  EXPECT_EQ(Uar({0, 0, 1, 0}, {0, 0, 1, 1}), 0.75);
  EXPECT_EQ(Uar({2, 2, 2, 2, 2, 2, 2, 2}, {0, 0, 1, 1, 2, 2, 3, 3}), 0.25);
}

TEST(Uar, Errors) {
  EXPECT_EQ(KindOf([] { Uar({}, {}); }), ErrorKind::kInvalidInput);
  EXPECT_EQ(KindOf([] { Uar({0}, {0, 1}); }), ErrorKind::kDimension);
}

// Independent implementation: dense confusion matrix, recall = diagonal over
// row sum, averaged over rows with support.
double ConfusionUar(const std::vector<int>& pred, const std::vector<int>& label, int k) {
  std::vector<std::vector<long>> cm(std::size_t(k), std::vector<long>(std::size_t(k), 0));
  for (std::size_t i = 0; i < pred.size(); ++i) ++cm[std::size_t(label[i])][std::size_t(pred[i])];
  double sum = 0.0;
  int present = 0;
  for (int r = 0; r < k; ++r) {
    const long row = std::accumulate(cm[std::size_t(r)].begin(), cm[std::size_t(r)].end(), 0L);
    if (row == 0) continue;
    sum += double(cm[std::size_t(r)][std::size_t(r)]) / double(row);
    ++present;
  }
  return sum / present;
}

TEST(Uar, MatchesConfusionMatrixOracle) {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + int(gen() % 5);
    const std::size_t n = 1 + gen() % 60;
    std::vector<int> p(n), y(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = int(gen() % k), y[i] = int(gen() % k);
    ASSERT_EQ(Uar(p, y), ConfusionUar(p, y, k)) << "trial " << trial;
  }
}

TEST(Uar, RelabelingInvariance) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + int(gen() % 5);
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    std::vector<int> p(40), y(40), pp(40), yy(40);
    for (std::size_t i = 0; i < 40; ++i) {
      p[i] = int(gen() % k), y[i] = int(gen() % k);
      pp[i] = perm[std::size_t(p[i])], yy[i] = perm[std::size_t(y[i])];
    }
    EXPECT_DOUBLE_EQ(Uar(p, y), Uar(pp, yy));
  }
}

TEST(Summarize, SampleStd) {
  const auto s = Summarize({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.std, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(Summarize({0.4}).std, 0.0);
  EXPECT_EQ(KindOf([] { Summarize({}); }), ErrorKind::kInvalidInput);
}

// --- schedule ----------------------------------------------------------------------

TEST(LrSchedule, HalvesAfterExactlyFiveStagnantEpochs) {
  LrSchedule s;
  EXPECT_EQ(s.lr(), 1e-4);
  EXPECT_TRUE(s.Step(0.5).improved);
  for (int i = 0; i < 4; ++i) {
    const auto d = s.Step(0.5);
    EXPECT_EQ(d.action, ScheduleAction::kContinue);
    EXPECT_EQ(d.lr, 1e-4);
  }
  const auto d = s.Step(0.4);
  EXPECT_EQ(d.action, ScheduleAction::kRestoreBest);
  EXPECT_EQ(d.lr, 5e-5);
  EXPECT_EQ(s.stagnant(), 0);
}

TEST(LrSchedule, StopsBelowFloor) {
  LrSchedule s({1.25e-5, 5, 0.5, 1e-5});
  s.Step(0.3);
  ScheduleDecision d{};
  for (int i = 0; i < 5; ++i) d = s.Step(0.3);
  EXPECT_EQ(d.lr, 6.25e-6);
  EXPECT_EQ(d.action, ScheduleAction::kStop);
}

TEST(LrSchedule, FullDescentFromDefault) {
  // 1e-4 -> 5e-5 -> 2.5e-5 -> 1.25e-5 -> 6.25e-6 (stop): four plateaus.
  LrSchedule s;
  s.Step(0.1);
  std::vector<ScheduleAction> plateaus;
  for (int epoch = 0; epoch < 100; ++epoch) {
    const auto d = s.Step(0.1);
    if (d.action != ScheduleAction::kContinue) plateaus.push_back(d.action);
    if (d.action == ScheduleAction::kStop) break;
  }
  ASSERT_EQ(plateaus.size(), 4u);
  EXPECT_EQ(plateaus.back(), ScheduleAction::kStop);
  for (std::size_t i = 0; i + 1 < plateaus.size(); ++i)
    EXPECT_EQ(plateaus[i], ScheduleAction::kRestoreBest);
}

TEST(LrSchedule, StrictImprovementNeverChangesLr) {
  LrSchedule s;
  for (int i = 0; i < 50; ++i) {
    const auto d = s.Step(0.01 * i);
    EXPECT_EQ(d.lr, 1e-4);
    EXPECT_EQ(d.action, ScheduleAction::kContinue);
  }
}

TEST(LrSchedule, MonotoneOnRandomTraces) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    LrSchedule s;
    double prev = s.lr();
    for (int e = 0; e < 200; ++e) {
      const auto d = s.Step(u(gen));
      ASSERT_LE(d.lr, prev);
      prev = d.lr;
      if (d.action == ScheduleAction::kStop) break;
    }
  }
}

TEST(LrSchedule, InvalidOptions) {
  EXPECT_EQ(KindOf([] { LrSchedule({0.0, 5, 0.5, 1e-5}); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([] { LrSchedule({1e-4, 0, 0.5, 1e-5}); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([] { LrSchedule({1e-4, 5, 1.0, 1e-5}); }), ErrorKind::kConfig);
}

// --- config ------------------------------------------------------------------------

TEST(Config, Defaults) {
  const auto c = ExperimentConfig::From(Settings());
  EXPECT_EQ(c.seeds, 10);
  EXPECT_EQ(c.lr, 1e-4);
  EXPECT_EQ(c.min_lr, 1e-5);
  EXPECT_EQ(c.patience, 5);
  EXPECT_EQ(c.max_epochs, 200);
  EXPECT_EQ(c.ablation, 1);
  EXPECT_EQ(c.arch.latent, 256u);
  EXPECT_EQ(c.validation_domain, 0);
  EXPECT_EQ(c.Name(), "ADDi");
}

TEST(Config, UnknownKeyNamed) {
  Settings s;
  std::string what;
  EXPECT_EQ(KindOf([&] { s.Override("train.lambda=0.5"); }, &what), ErrorKind::kConfig);
  EXPECT_NE(what.find("train.lambda"), std::string::npos);
  std::istringstream file("train.seeds = 3\nmodel.bogus = 1\n");
  EXPECT_EQ(KindOf([&] { s.Parse(file, "x.cfg"); }, &what), ErrorKind::kConfig);
  EXPECT_NE(what.find("x.cfg:2"), std::string::npos) << what;
  EXPECT_NE(what.find("model.bogus"), std::string::npos) << what;
}

TEST(Config, TypeChecks) {
  Settings s;
  EXPECT_EQ(KindOf([&] { s.Set("train.seeds", "ten"); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([&] { s.Set("train.lr", "fast"); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([&] { s.Set("data.language_id", "maybe"); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([&] { s.Set("model.hidden", "8,x"); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([&] { s.Override("train.seeds"); }), ErrorKind::kConfig);
}

TEST(Config, RangeChecks) {
  auto with = [](const std::string& kv) {
    Settings s;
    s.Override(kv);
    ExperimentConfig::From(s);
  };
  EXPECT_EQ(KindOf([&] { with("model.ablation=6"); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([&] { with("model.ablation=0"); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([&] { with("data.target_label_fraction=1.5"); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([&] { with("data.source_fraction=-0.1"); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([&] { with("augment.mode=both"); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([&] { with("model.fake_routing=sideways"); }), ErrorKind::kConfig);
}

TEST(Config, CanonicalValuesAndFingerprint) {
  Settings a, b;
  a.Set("data.source_fraction", "1");
  b.Set("data.source_fraction", " 1.0 ");
  EXPECT_EQ(a, b);
  b.Set("report.name", "other");
  EXPECT_EQ(a.Fingerprint(), b.Fingerprint());
  b.Set("train.seeds", "3");
  EXPECT_NE(a.Fingerprint(), b.Fingerprint());
  a.Set("model.hidden", " 8 , 4");
  EXPECT_EQ(a.Get("model.hidden"), "8,4");
}

TEST(Config, SerializeReloads) {
  Settings a;
  a.Set("model.lambda", "0.25");
  a.Set("data.languages", "en, de");
  std::istringstream is(a.Serialize());
  Settings b;
  b.Parse(is);
  EXPECT_EQ(a, b);
}

// --- ablation ladder ---------------------------------------------------------------

TEST(Ablation, ComponentSets) {
  auto base = ExperimentConfig::From(Settings());
  base.arch.n_frames = 8;
  const std::vector<std::set<std::string>> want = {{"E", "Gd", "Ds", "Dt", "Cd"},
                                                   {"E", "Gd", "Ds", "Cd"},
                                                   {"E", "Gd", "Dt", "Cd"},
                                                   {"E", "Gd", "Cd"},
                                                   {"E", "Cd"}};
  std::vector<std::size_t> sizes;
  for (int id = 1; id <= 5; ++id) {
    const auto c = AblationConfig(base, id);
    EXPECT_EQ(c.ablation, id);
    EXPECT_EQ(c.arch.conv_channels, base.arch.conv_channels);
    auto arch = c.arch;
    arch.n_frames = 8;
    model::AddiModel<float> m(arch, model::AblationComponents(id), 1);
    EXPECT_EQ(m.params().Namespaces(), want[std::size_t(id - 1)]) << "id " << id;
    sizes.push_back(m.params().ScalarCount());
  }
  EXPECT_EQ(sizes[1], sizes[2]);
  EXPECT_EQ(KindOf([&] { AblationConfig(base, 6); }), ErrorKind::kInvalidInput);
}

// --- experiments at tiny scale -----------------------------------------------------

Settings TinySettings() {
  Settings s;
  for (const char* kv : {"toy.n_source=48", "toy.n_target=48", "toy.n_unlabelled=16",
                         "model.conv_channels=2,3", "model.conv_kernels=3,3", "model.latent=6",
                         "model.hidden=5,4", "train.seeds=2", "train.max_epochs=2",
                         "train.batch_size=8", "train.lr=0.001", "pretrain.epochs=1",
                         "pretrain.batch_size=8"})
    s.Override(kv);
  return s;
}

TEST(RunExperiment, AggregatesAndReplaysBitIdentically) {
  const auto cfg = ExperimentConfig::From(TinySettings());
  const auto data = LoadData(cfg);
  EXPECT_EQ(data.n_mels, 40u);
  const auto r1 = RunExperiment(cfg, data);
  ASSERT_EQ(r1.runs.size(), 2u);
  const auto s = Summarize(r1.Uars());
  EXPECT_NEAR(r1.mean, s.mean, 1e-12);
  EXPECT_NEAR(r1.std, s.std, 1e-12);
  EXPECT_EQ(r1.fingerprint, cfg.settings.Fingerprint());
  for (const auto& run : r1.runs) {
    EXPECT_GE(run.uar, 0.0);
    EXPECT_LE(run.uar, 1.0);
    EXPECT_EQ(run.target_labels_used, 0u);
  }
  const auto r2 = RunExperiment(cfg, LoadData(cfg));
  EXPECT_EQ(r1, r2);
}

TEST(RunExperiment, PretrainedVariantRuns) {
  Settings s = TinySettings();
  s.Override("pretrain.mode=synthetic_generation");
  s.Override("train.seeds=1");
  const auto cfg = ExperimentConfig::From(s);
  EXPECT_EQ(cfg.Name(), "sADDi");
  const auto data = LoadData(cfg);
  int pretexts = 0;
  RunHooks hooks;
  hooks.on_pretext = [&](int, pretext::PretextModel<Scalar>&) { ++pretexts; };
  const auto r = RunExperiment(cfg, data, hooks);
  EXPECT_EQ(pretexts, 1);
  EXPECT_EQ(r.runs.size(), 1u);
}

TEST(RunExperiment, MissingArtifactsFailBeforeTraining) {
  Settings s = TinySettings();
  s.Override("data.source=/nonexistent/manifest.tsv");
  std::string what;
  EXPECT_EQ(KindOf([&] { LoadData(ExperimentConfig::From(s)); }, &what), ErrorKind::kConfig);
  EXPECT_NE(what.find("/nonexistent/manifest.tsv"), std::string::npos);
  Settings p = TinySettings();
  p.Override("pretrain.encoder=/nonexistent/encoder.ckpt");
  EXPECT_EQ(KindOf([&] { LoadData(ExperimentConfig::From(p)); }), ErrorKind::kConfig);
}

TEST(FractionSweep, SharedSeedsAndDegenerateGrid) {
  const auto cfg = ExperimentConfig::From(TinySettings());
  const auto data = LoadData(cfg);
  const auto reps = FractionSweep(cfg, data, SweepAxis::kTargetLabels, {0.0, 0.5, 1.0});
  ASSERT_EQ(reps.size(), 3u);
  for (const auto& r : reps) EXPECT_EQ(r.Seeds(), reps[0].Seeds());
  EXPECT_EQ(reps[0].runs[0].target_labels_used, 0u);
  EXPECT_GT(reps[2].runs[0].target_labels_used, reps[1].runs[0].target_labels_used);

  // Grid {0} on the target-label axis is the plain zero-label protocol.
  const auto plain = RunExperiment(cfg, data);
  const auto zero = FractionSweep(cfg, data, SweepAxis::kTargetLabels, {0.0});
  EXPECT_EQ(zero[0].runs, plain.runs);
  EXPECT_EQ(zero[0].fingerprint, plain.fingerprint);

  EXPECT_EQ(KindOf([&] { FractionSweep(cfg, data, SweepAxis::kSourceSize, {1.5}); }),
            ErrorKind::kInvalidInput);
}

TEST(FractionSweep, FullSourceEqualsPlainRun) {
  const auto cfg = ExperimentConfig::From(TinySettings());
  const auto data = LoadData(cfg);
  auto swept = FractionSweep(cfg, data, SweepAxis::kSourceSize, {1.0})[0];
  const auto plain = RunExperiment(cfg, data);
  EXPECT_EQ(swept.sweep_axis, "source_size");
  swept.sweep_axis.clear();
  swept.sweep_value.reset();
  EXPECT_EQ(swept, plain);
}

// --- reports -------------------------------------------------------------------------

MetricsReport SampleReport(const std::string& name, int seeds) {
  MetricsReport r;
  r.name = name;
  r.fingerprint = "0123456789abcdef";
  for (int i = 0; i < seeds; ++i) {
    SeedResult s;
    s.seed = 1000 + std::uint64_t(i);
    s.uar = 0.1 + 0.1 / 3.0 * i;
    s.recalls = {{0, 0.5}, {1, 1.0 / 3.0}, {3, 0.0}};
    s.epochs = 7 + i;
    s.best_val = 0.4 + 1e-17 * i;
    s.target_labels_used = std::size_t(i);
    r.runs.push_back(s);
  }
  Aggregate(r);
  return r;
}

TEST(Report, JsonRoundTrip) {
  auto a = SampleReport("ADDi", 3);
  auto b = SampleReport("CNN", 2);
  b.sweep_axis = "target_labels";
  b.sweep_value = 0.1;
  b.training_log = "train.jsonl";
  const auto back = ReportsFromJson(FormatReport({a, b}, ReportFormat::kJson));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], a);
  EXPECT_EQ(back[1], b);
}

TEST(Report, CsvRowsAreSeedsTimesConfigs) {
  const auto csv = FormatReport({SampleReport("a", 3), SampleReport("b", 4)}, ReportFormat::kCsv);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3 + 4);
  EXPECT_NE(csv.find("0123456789abcdef"), std::string::npos);
}

TEST(Report, EmptyTableIsHeaderOnly) {
  const auto t = FormatReport({}, ReportFormat::kTable);
  EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 1);
  EXPECT_EQ(t.rfind("model", 0), 0u);
  const auto one = FormatReport({SampleReport("ADDi", 2)}, ReportFormat::kTable);
  EXPECT_NE(one.find("ADDi"), std::string::npos);
}

TEST(Report, Errors) {
  EXPECT_EQ(KindOf([] { EmitReport({}, ReportFormat::kCsv, "/nonexistent/dir/r.csv"); }),
            ErrorKind::kIo);
  EXPECT_EQ(KindOf([] { ReportsFromJson("{not json"); }), ErrorKind::kParse);
  EXPECT_EQ(KindOf([] { ReportsFromJson("{\"name\": 1}"); }), ErrorKind::kSchema);
  EXPECT_EQ(KindOf([] { ParseReportFormat("xml"); }), ErrorKind::kConfig);
}

TEST(Report, DeterministicBytes) {
  const auto r = SampleReport("ADDi", 3);
  for (auto f : {ReportFormat::kTable, ReportFormat::kJson, ReportFormat::kCsv})
    EXPECT_EQ(FormatReport({r}, f), FormatReport({r}, f));
}

}  // namespace
}  // namespace addi::eval
