// addi/eval/experiment.hpp

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

// Repeat protocol. For repeat i with seed s_i = DeriveSeed(train.seed, i):
//
//   1. subsample the source (data.source_fraction);
//   2. split the target stratified into train (unlabelled apart from
//      data.target_label_fraction) and test, then carve a stratified
//      validation share out of the source train split, or out of the target
//      train split when train.validation_domain = target;
//   3. optionally pretrain a pretext model on the unlabelled pool, or load an
//      exported encoder, and optionally augment the source with synthetic
//      samples;
//   4. train with the plateau schedule on validation UAR, restoring
//      the best epoch at the end;
//   5. score UAR on the target test split.
//
// Everything random derives from s_i, so runs replay bit for bit.

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "addi/data/batches.hpp"
#include "addi/data/split.hpp"
#include "addi/eval/config.hpp"
#include "addi/eval/metrics.hpp"
#include "addi/eval/schedule.hpp"
#include "addi/eval/toy.hpp"
#include "addi/model/addi.hpp"
#include "addi/pretext/pretext.hpp"

namespace addi::eval {

using Scalar = float;
using ad::Tensor;

struct DataBundle {
  std::vector<data::Utterance> source, target, unlabelled;
  std::size_t n_mels = 0, n_frames = 0;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string ResolvePath(const std::string& path, const std::string& root) {
  if (root.empty() || path.empty() || path.front() == '/') return path;
  return root + "/" + path;
}

inline std::vector<data::UtteranceRecord> LoadRecords(const std::string& manifest,
                                                      const std::string& root,
                                                      std::vector<std::string>& warnings) {
  Require(std::filesystem::exists(manifest), ErrorKind::kConfig,
          "manifest " + manifest + " does not exist");
  auto corpus = data::LoadManifest(manifest);
  warnings.insert(warnings.end(), corpus.warnings.begin(), corpus.warnings.end());
  for (const auto& r : corpus.records) {
    Require(!r.feature_path.empty(), ErrorKind::kConfig,
            manifest + ": record " + r.id + " has no feature path");
    const std::string p = ResolvePath(r.feature_path, root);
    Require(std::filesystem::exists(p), ErrorKind::kConfig,
            manifest + ": feature cache " + p + " for " + r.id + " does not exist");
  }
  return corpus.records;
}

inline void RequireLabels(const std::vector<data::UtteranceRecord>& records,
                          data::LabelKind scheme, const std::string& what) {
  for (const auto& r : records) {
    Require(r.label.has_value(), ErrorKind::kData, what + " record " + r.id + " has no label");
    Require(r.label->kind == scheme, ErrorKind::kData,
            what + " record " + r.id + " is labelled " +
                std::string(data::LabelKindName(r.label->kind)) + ", experiment uses " +
                std::string(data::LabelKindName(scheme)));
  }
}

inline void PadAll(DataBundle& d) {
  std::size_t frames = 0, mels = 0;
  for (auto* set : {&d.source, &d.target, &d.unlabelled}) {
    for (const auto& u : *set) {
      frames = std::max(frames, u.features->n_frames);
      if (mels == 0) mels = u.features->n_mels;
      Require(u.features->n_mels == mels, ErrorKind::kData,
              "utterance " + u.record.id + " has " + std::to_string(u.features->n_mels) +
                  " mel bands, expected " + std::to_string(mels));
    }
  }
  for (auto* set : {&d.source, &d.target, &d.unlabelled}) {
    for (auto& u : *set) {
      if (u.features->n_frames != frames) {
        u.features = std::make_shared<const signal::FeatureMatrix>(signal::PadTo(*u.features, frames));
      }
    }
  }
  d.n_mels = mels;
  d.n_frames = frames;
}

}  // namespace detail

inline ToyOptions ToyOptionsFrom(const Settings& s) {
  ToyOptions o;
  o.n_source = static_cast<std::size_t>(s.Int("toy.n_source"));
  o.n_target = static_cast<std::size_t>(s.Int("toy.n_target"));
  o.n_unlabelled = static_cast<std::size_t>(s.Int("toy.n_unlabelled"));
  o.n_frames = static_cast<std::size_t>(s.Int("toy.n_frames"));
  o.smooth = s.Real("toy.smooth");
  o.signal = s.Real("toy.signal");
  o.noise = s.Real("toy.noise");
  o.shift = s.Real("toy.shift");
  o.target_noise = s.Real("toy.target_noise");
  o.seed = static_cast<std::uint64_t>(s.Int("toy.seed"));
  return o;
}

// Resolves every data source named by the config. Missing manifests or
// feature caches are configuration errors raised here, before any training.
inline DataBundle LoadData(const ExperimentConfig& cfg) {
  DataBundle d;
  const bool any_toy = cfg.source == "toy" || cfg.target == "toy" || cfg.unlabelled == "toy";
  std::optional<ToyCorpus> toy;
  if (any_toy) toy = MakeToyCorpus(ToyOptionsFrom(cfg.settings));
  auto load = [&](const std::string& spec, std::vector<data::Utterance> ToyCorpus::*member) {
    if (spec == "toy") return (*toy).*member;
    return data::LoadFeatures(detail::LoadRecords(spec, cfg.feature_root, d.warnings),
                              cfg.feature_root);
  };
  d.source = load(cfg.source, &ToyCorpus::source);
  d.target = load(cfg.target, &ToyCorpus::target);
  if (!cfg.unlabelled.empty()) d.unlabelled = load(cfg.unlabelled, &ToyCorpus::unlabelled);
  Require(!d.source.empty(), ErrorKind::kConfig, "source corpus is empty");
  Require(!d.target.empty(), ErrorKind::kConfig, "target corpus is empty");
  std::vector<data::UtteranceRecord> recs;
  for (const auto& u : d.source) recs.push_back(u.record);
  detail::RequireLabels(recs, cfg.label_scheme, "source");
  recs.clear();
  for (const auto& u : d.target) recs.push_back(u.record);
  detail::RequireLabels(recs, cfg.label_scheme, "target");
  for (auto& u : d.target) u.record.domain = 1;
  for (auto& u : d.source) u.record.domain = 0;
  if (cfg.pretrain != PretrainMode::kNone && cfg.pretrain_encoder.empty()) {
    Require(!d.unlabelled.empty(), ErrorKind::kConfig,
            "pretraining needs a non-empty data.unlabelled pool");
  }
  if (cfg.augment != pretext::AugmentMode::kReal) {
    Require(cfg.pretrain == PretrainMode::kSyntheticGeneration && cfg.pretrain_encoder.empty(),
            ErrorKind::kConfig,
            "augment.mode " + std::string(pretext::AugmentModeName(cfg.augment)) +
                " needs pretrain.mode = synthetic_generation and no pretrain.encoder");
    Require(cfg.augment_count > 0, ErrorKind::kConfig, "augment.count must be positive");
  }
  if (!cfg.pretrain_encoder.empty()) {
    Require(std::filesystem::exists(cfg.pretrain_encoder), ErrorKind::kConfig,
            "pretrain.encoder " + cfg.pretrain_encoder + " does not exist");
  }
  detail::PadAll(d);
  return d;
}

// --- single runs ----------------------------------------------------------------

inline Tensor<Scalar> StackFeatures(const std::vector<data::Utterance>& items, std::size_t begin,
                                    std::size_t end) {
  const auto& f0 = *items.at(begin).features;
  const std::size_t plane = f0.n_mels * f0.n_frames;
  Tensor<Scalar> x({end - begin, 1, f0.n_mels, f0.n_frames});
  for (std::size_t i = begin; i < end; ++i) {
    std::copy(items[i].features->values.begin(), items[i].features->values.end(),
              x.data() + (i - begin) * plane);
  }
  return x;
}

inline Tensor<Scalar> StackLanguages(const std::vector<data::Utterance>& items, std::size_t begin,
                                     std::size_t end, const data::LanguageVocabulary& vocab) {
  Tensor<Scalar> out({end - begin, vocab.size()});
  for (std::size_t i = begin; i < end; ++i) {
    auto code = vocab.OneHot(items[i].record.language);
    std::copy(code.begin(), code.end(), out.data() + (i - begin) * vocab.size());
  }
  return out;
}

struct Predictions {
  std::vector<int> predicted, labels;
};

inline Predictions Predict(model::AddiModel<Scalar>& m, const std::vector<data::Utterance>& items,
                           const data::LanguageVocabulary* vocab = nullptr,
                           std::size_t chunk = 256) {
  Predictions p;
  for (std::size_t b = 0; b < items.size(); b += chunk) {
    const std::size_t e = std::min(items.size(), b + chunk);
    std::optional<Tensor<Scalar>> lang;
    if (m.config().language_dim > 0) lang = StackLanguages(items, b, e, *vocab);
    const auto logits = m.LogitsEval(StackFeatures(items, b, e), lang ? &*lang : nullptr);
    const std::size_t k = logits.dim(1);
    for (std::size_t i = 0; i < e - b; ++i) {
      const Scalar* row = logits.data() + i * k;
      p.predicted.push_back(static_cast<int>(std::max_element(row, row + k) - row));
      p.labels.push_back(items[b + i].record.label ? items[b + i].record.label->value : -1);
    }
  }
  return p;
}

inline double EvaluateUar(model::AddiModel<Scalar>& m, const std::vector<data::Utterance>& items,
                          const data::LanguageVocabulary* vocab = nullptr) {
  auto p = Predict(m, items, vocab);
  return Uar(p.predicted, p.labels);
}

// Per-repeat data partition.
struct SeedSplit {
  std::vector<data::Utterance> source_train, target_train, target_test;
  std::vector<data::Utterance> validation;  // from the domain named by train.validation_domain
};

inline SeedSplit MakeSeedSplit(const ExperimentConfig& cfg, const DataBundle& d,
                               std::uint64_t seed) {
  const std::size_t k = cfg.arch.n_classes;
  SeedSplit s;
  s.source_train = data::Subsample(d.source, cfg.source_fraction, DeriveSeed(seed, "split.fraction"));
  auto [test, train] = data::SplitSource(d.target, cfg.test_fraction, DeriveSeed(seed, "split.target"), k);
  s.target_test = std::move(test);
  s.target_train = std::move(train);
  if (cfg.validation_fraction > 0.0) {
    auto& pool = cfg.validation_domain == 1 ? s.target_train : s.source_train;
    auto [val, rest] = data::SplitSource(pool, cfg.validation_fraction,
                                         DeriveSeed(seed, "split.validation"), k);
    s.validation = std::move(val);
    pool = std::move(rest);
  }
  Require(!s.source_train.empty(), ErrorKind::kData, "source training split is empty");
  Require(!s.target_test.empty(), ErrorKind::kData, "target test split is empty");
  return s;
}

struct PretrainResult {
  pretext::PretextModel<Scalar> model;
  std::vector<double> fake_prob;  // per epoch mean fake-class probability (GAN mode)
};

inline PretrainResult Pretrain(const ExperimentConfig& cfg, const std::vector<data::Utterance>& pool,
                               std::uint64_t seed, std::ostream* log = nullptr) {
  Require(!pool.empty(), ErrorKind::kConfig, "pretraining needs a non-empty unlabelled pool");
  auto labelled = data::AssignPseudoLabels(pool, pretext::kPseudoClasses, DeriveSeed(seed, "pseudo"));
  PretrainResult r{pretext::PretextModel<Scalar>(cfg.arch, seed), {}};
  pretext::PretextOptimizers<Scalar> opt;
  Rng rng(DeriveSeed(seed, "pretrain.shuffle"));
  std::vector<std::size_t> order(labelled.size());
  std::size_t step = 0;
  for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.Shuffle(order);
    double fake_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.pretrain_batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.pretrain_batch_size);
      std::vector<data::Utterance> rows;
      std::vector<int> y;
      for (std::size_t i = b; i < e; ++i) {
        rows.push_back(labelled[order[i]]);
        y.push_back(*labelled[order[i]].record.pseudo_label);
      }
      const auto x = StackFeatures(rows, 0, rows.size());
      nlohmann::json line{{"phase", "pretrain"}, {"step", step++}, {"lr", cfg.pretrain_lr}};
      if (cfg.pretrain == PretrainMode::kReconstruction) {
        line["L_AE"] = pretext::ReconstructionStep(r.model, x, opt, cfg.pretrain_lr);
      } else {
        auto rep = pretext::PretextTrainStep(r.model, x, y, opt, cfg.pretrain_lr);
        fake_sum += rep.fake_prob;
        line["L_Dp_real"] = rep.l_d_real;
        line["L_Dp_fake"] = rep.l_d_fake;
        line["L_Gp"] = rep.l_g;
      }
      ++batches;
      if (log) *log << line.dump() << '\n';
    }
    if (cfg.pretrain == PretrainMode::kSyntheticGeneration) {
      r.fake_prob.push_back(fake_sum / double(std::max<std::size_t>(batches, 1)));
    }
  }
  return r;
}

struct TrainOutcome {
  model::AddiModel<Scalar> model;
  int epochs = 0;
  double best_val = 0.0;
  double final_lr = 0.0;
  std::size_t target_labels_used = 0;  // distinct target ids seen by the classifier loss
};

// Trains one model variant on a prepared split.
inline TrainOutcome TrainModel(const ExperimentConfig& cfg, const SeedSplit& split,
                               std::uint64_t seed, const ad::Checkpoint* encoder,
                               const data::LanguageVocabulary* vocab, std::ostream* log = nullptr) {
  model::ArchitectureConfig arch = cfg.arch;
  TrainOutcome out{model::AddiModel<Scalar>(arch, model::AblationComponents(cfg.ablation),
                                            DeriveSeed(seed, "init")),
                   0, 0.0, cfg.lr, 0};
  auto& m = out.model;
  if (encoder) pretext::ImportEncoder(*encoder, m);

  data::BatchStream stream(split.source_train, split.target_train, cfg.batch_size,
                           DeriveSeed(seed, "batches"), cfg.target_label_fraction, vocab);
  model::StageOptimizers<Scalar> opt;
  Rng dropout(DeriveSeed(seed, "dropout"));
  LrSchedule schedule({cfg.lr, cfg.patience, cfg.lr_factor, cfg.min_lr});
  ad::ParameterStore<Scalar> best = m.params();
  model::StageOptimizers<Scalar> best_opt = opt;
  std::set<std::string> target_ids;
  for (const auto& u : split.target_train) target_ids.insert(u.record.id);
  std::set<std::string> seen_target;

  const auto& val_set = split.validation.empty() ? split.source_train : split.validation;
  double lr = cfg.lr;
  std::size_t step = 0;
  data::DomainBatch batch;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    stream.StartEpoch();
    while (stream.Next(batch)) {
      auto rep = model::AddiTrainStep(m, batch, opt, lr, cfg.addi, dropout);
      for (const auto& id : rep.labelled_ids) {
        if (target_ids.count(id)) seen_target.insert(id);
      }
      if (log) {
        auto opt_num = [](const std::optional<double>& v) -> nlohmann::json {
          return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
        };
        nlohmann::json line{{"step", step}, {"epoch", epoch},        {"L_AE", opt_num(rep.l_ae)},
                            {"L_G_adv", opt_num(rep.l_g_adv)},       {"L_Ds", opt_num(rep.l_ds)},
                            {"L_Dt", opt_num(rep.l_dt)},             {"L_C", opt_num(rep.l_c)},
                            {"lr", lr}};
        *log << line.dump() << '\n';
      }
      ++step;
    }
    out.epochs = epoch + 1;
    const double val = EvaluateUar(m, val_set, vocab);
    const auto decision = schedule.Step(val);
    if (log) {
      *log << nlohmann::json{{"epoch", epoch}, {"val_uar", val}, {"lr", decision.lr},
                             {"action", ScheduleActionName(decision.action)}}
                  .dump()
           << '\n';
    }
    if (decision.improved) {
      best.CopyValuesFrom(m.params());
      best_opt = opt;
    }
    lr = decision.lr;
    if (decision.action == ScheduleAction::kStop) break;
    if (decision.action == ScheduleAction::kRestoreBest) {
      m.params().CopyValuesFrom(best);
      opt = best_opt;
    }
  }
  m.params().CopyValuesFrom(best);
  out.best_val = schedule.best();
  out.final_lr = lr;
  out.target_labels_used = seen_target.size();
  return out;
}

// --- repeat protocol ----------------------------------------------------------------

struct SeedResult {
  std::uint64_t seed = 0;
  double uar = 0.0;
  std::map<int, double> recalls;
  int epochs = 0;
  double best_val = 0.0;
  std::size_t target_labels_used = 0;

  friend bool operator==(const SeedResult&, const SeedResult&) = default;
};

struct MetricsReport {
  std::string name;
  std::string fingerprint;
  std::string sweep_axis;             // empty outside sweeps
  std::optional<double> sweep_value;  // grid point of a sweep
  std::vector<SeedResult> runs;
  double mean = 0.0;
  double std = 0.0;
  std::map<int, double> mean_recalls;
  std::string training_log;  // path of the JSON-lines training curve, if written

  std::vector<std::uint64_t> Seeds() const {
    std::vector<std::uint64_t> s;
    for (const auto& r : runs) s.push_back(r.seed);
    return s;
  }

  std::vector<double> Uars() const {
    std::vector<double> u;
    for (const auto& r : runs) u.push_back(r.uar);
    return u;
  }

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

inline std::uint64_t RepeatSeed(const ExperimentConfig& cfg, int i) {
  return DeriveSeed(cfg.seed, "repeat", static_cast<std::uint64_t>(i));
}

inline std::optional<data::LanguageVocabulary> VocabularyFor(const ExperimentConfig& cfg) {
  if (!cfg.language_id) return std::nullopt;
  return data::LanguageVocabulary(cfg.languages);
}

// Options for observing or reusing intermediate artifacts of a repeat.
struct RunHooks {
  std::ostream* log = nullptr;
  // Called after training with the repeat index and trained model.
  std::function<void(int, model::AddiModel<Scalar>&)> on_model;
  // Called after pretraining with the repeat index and pretext model.
  std::function<void(int, pretext::PretextModel<Scalar>&)> on_pretext;
};

inline SeedResult RunSeed(const ExperimentConfig& cfg, const DataBundle& d, int repeat,
                          const RunHooks& hooks = {}) {
  ExperimentConfig c = cfg;
  c.arch.n_mels = d.n_mels;
  c.arch.n_frames = d.n_frames;
  const std::uint64_t seed = RepeatSeed(cfg, repeat);
  SeedSplit split = MakeSeedSplit(c, d, seed);
  auto vocab = VocabularyFor(c);

  std::optional<ad::Checkpoint> encoder;
  if (!c.pretrain_encoder.empty()) {
    encoder = ad::ReadCheckpoint(c.pretrain_encoder);
  } else if (c.pretrain != PretrainMode::kNone) {
    auto pre = Pretrain(c, d.unlabelled, DeriveSeed(seed, "pretrain"), hooks.log);
    if (hooks.on_pretext) hooks.on_pretext(repeat, pre.model);
    encoder = pretext::ExportEncoder(pre.model);
    if (c.augment != pretext::AugmentMode::kReal) {
      auto syn = pretext::GenerateSynthetic(pre.model, c.augment_count, {},
                                            DeriveSeed(seed, "synthesis"));
      split.source_train = pretext::AugmentDataset(split.source_train,
                                                   pretext::SyntheticUtterances(syn), c.augment);
    }
  }

  auto trained = TrainModel(c, split, seed, encoder ? &*encoder : nullptr, vocab ? &*vocab : nullptr,
                            hooks.log);
  if (hooks.on_model) hooks.on_model(repeat, trained.model);
  auto pred = Predict(trained.model, split.target_test, vocab ? &*vocab : nullptr);
  SeedResult r;
  r.seed = seed;
  r.uar = Uar(pred.predicted, pred.labels);
  r.recalls = PerClassRecall(pred.predicted, pred.labels);
  r.epochs = trained.epochs;
  r.best_val = trained.best_val;
  r.target_labels_used = trained.target_labels_used;
  return r;
}

inline void Aggregate(MetricsReport& rep) {
  const auto s = Summarize(rep.Uars());
  rep.mean = s.mean;
  rep.std = s.std;
  rep.mean_recalls.clear();
  std::map<int, std::vector<double>> per;
  for (const auto& r : rep.runs)
    for (const auto& [c, v] : r.recalls) per[c].push_back(v);
  for (const auto& [c, v] : per) rep.mean_recalls[c] = Summarize(v).mean;
}

inline MetricsReport RunExperiment(const ExperimentConfig& cfg, const DataBundle& d,
                                   const RunHooks& hooks = {}) {
  MetricsReport rep;
  rep.name = cfg.report_name.empty() ? cfg.Name() : cfg.report_name;
  rep.fingerprint = cfg.settings.Fingerprint();
  for (int i = 0; i < cfg.seeds; ++i) rep.runs.push_back(RunSeed(cfg, d, i, hooks));
  Aggregate(rep);
  return rep;
}

inline ExperimentConfig WithOverride(const ExperimentConfig& cfg, const std::string& key,
                                     const std::string& value) {
  Settings s = cfg.settings;
  s.Set(key, value);
  return ExperimentConfig::From(s);
}

inline std::string FormatReal(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// One experiment per grid value along `axis`, all sharing the repeat seeds.
inline std::vector<MetricsReport> FractionSweep(const ExperimentConfig& cfg, const DataBundle& d,
                                                SweepAxis axis, const std::vector<double>& grid,
                                                const RunHooks& hooks = {}) {
  Require(!grid.empty(), ErrorKind::kInvalidInput, "sweep grid is empty");
  for (double g : grid) {
    Require(g >= 0.0 && g <= 1.0, ErrorKind::kInvalidInput,
            "sweep grid value " + FormatReal(g) + " outside [0, 1]");
  }
  const std::string key =
      axis == SweepAxis::kTargetLabels ? "data.target_label_fraction" : "data.source_fraction";
  std::vector<MetricsReport> out;
  for (double g : grid) {
    auto rep = RunExperiment(WithOverride(cfg, key, FormatReal(g)), d, hooks);
    rep.sweep_axis = axis == SweepAxis::kTargetLabels ? "target_labels" : "source_size";
    rep.sweep_value = g;
    out.push_back(std::move(rep));
  }
  return out;
}

// Variant `id` of the ablation ladder under an otherwise unchanged config.
inline ExperimentConfig AblationConfig(const ExperimentConfig& cfg, int id) {
  model::AblationComponents(id);
  return WithOverride(cfg, "model.ablation", std::to_string(id));
}

}  // namespace addi::eval
