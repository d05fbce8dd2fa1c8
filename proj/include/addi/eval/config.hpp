// addi/eval/config.hpp

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

// Experiment configuration: flat text, one "dotted.key = value" per line, '#'
// starts a comment. Every key is declared in kConfigKeys with a type and a
// default; unknown keys and ill-typed values are configuration errors. Lists
// are comma separated.

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "addi/common/binary_io.hpp"
#include "addi/common/error.hpp"
#include "addi/data/labels.hpp"
#include "addi/model/addi.hpp"
#include "addi/pretext/pretext.hpp"

namespace addi::eval {

enum class ValueType { kInt, kReal, kBool, kString, kIntList, kRealList, kStringList };

struct KeySpec {
  std::string_view key;
  ValueType type;
  std::string_view default_value;
  std::string_view help;
};

// clang-format off
inline constexpr KeySpec kConfigKeys[] = {
  {"data.source", ValueType::kString, "toy", "source manifest path, or \"toy\" for the generated toy corpus"},
  {"data.target", ValueType::kString, "toy", "target manifest path, or \"toy\""},
  {"data.unlabelled", ValueType::kString, "toy", "unlabelled pretext pool manifest, \"toy\", or empty"},
  {"data.feature_root", ValueType::kString, "", "directory that relative feature paths resolve against"},
  {"data.label_scheme", ValueType::kString, "categorical4", "categorical4 | binary_arousal | binary_valence"},
  {"data.source_fraction", ValueType::kReal, "1.0", "stratified fraction of the source corpus used"},
  {"data.target_label_fraction", ValueType::kReal, "0.0", "fraction of target train rows whose labels are visible"},
  {"data.language_id", ValueType::kBool, "false", "append a language one-hot to the classifier input"},
  {"data.languages", ValueType::kStringList, "", "language vocabulary for data.language_id"},
  {"toy.n_source", ValueType::kInt, "2000", "toy source items"},
  {"toy.n_target", ValueType::kInt, "2000", "toy target items"},
  {"toy.n_unlabelled", ValueType::kInt, "1000", "toy unlabelled pool items"},
  {"toy.n_frames", ValueType::kInt, "8", "toy feature frames"},
  {"toy.smooth", ValueType::kReal, "2.0", "blur width of the class patterns in bins"},
  {"toy.signal", ValueType::kReal, "0.5", "amplitude of the class patterns"},
  {"toy.noise", ValueType::kReal, "1.0", "per-item noise standard deviation"},
  {"toy.shift", ValueType::kReal, "2.0", "scale of the target per-channel offset"},
  {"toy.target_noise", ValueType::kReal, "0.5", "extra noise standard deviation in the target domain"},
  {"toy.seed", ValueType::kInt, "7", "seed of the toy corpus (fixed across repeats)"},
  {"model.ablation", ValueType::kInt, "1", "1 full | 2 Ds only | 3 Dt only | 4 no discriminators | 5 encoder + classifier"},
  {"model.lambda", ValueType::kReal, "1.0", "weight of the adversarial generator term"},
  {"model.non_saturating", ValueType::kBool, "false", "use -log D(fake) for the generator"},
  {"model.fake_routing", ValueType::kString, "cross", "cross: every row decoded with both codes | own: each row with its own code"},
  {"model.conv_channels", ValueType::kIntList, "16,32,64", "encoder conv output channels"},
  {"model.conv_kernels", ValueType::kIntList, "5,3,3", "encoder conv kernel sizes"},
  {"model.pool", ValueType::kInt, "2", "max-pool window and stride"},
  {"model.latent", ValueType::kInt, "256", "latent width"},
  {"model.hidden", ValueType::kIntList, "256,128", "dense hidden widths of discriminators and classifier"},
  {"model.dropout", ValueType::kReal, "0.3", "classifier dropout rate"},
  {"train.seed", ValueType::kInt, "1", "base seed; repeat i uses a seed derived from it"},
  {"train.seeds", ValueType::kInt, "10", "number of repeats"},
  {"train.batch_size", ValueType::kInt, "32", "rows per batch, half from each domain"},
  {"train.lr", ValueType::kReal, "0.0001", "initial learning rate"},
  {"train.patience", ValueType::kInt, "5", "stagnant epochs before the learning rate is halved"},
  {"train.lr_factor", ValueType::kReal, "0.5", "learning-rate multiplier on a plateau"},
  {"train.min_lr", ValueType::kReal, "0.00001", "stop once the learning rate falls below this"},
  {"train.max_epochs", ValueType::kInt, "200", "hard epoch cap"},
  {"train.validation_fraction", ValueType::kReal, "0.1", "share carved out for validation"},
  {"train.validation_domain", ValueType::kString, "source",
   "validation carve-out taken from source train or labelled target train"},
  {"train.test_fraction", ValueType::kReal, "0.2", "target share held out for testing"},
  {"pretrain.mode", ValueType::kString, "none", "none | reconstruction | synthetic_generation"},
  {"pretrain.encoder", ValueType::kString, "", "load this exported encoder instead of pretraining"},
  {"pretrain.epochs", ValueType::kInt, "20", "pretext epochs over the unlabelled pool"},
  {"pretrain.lr", ValueType::kReal, "0.0001", "pretext learning rate"},
  {"pretrain.batch_size", ValueType::kInt, "32", "pretext batch size"},
  {"augment.mode", ValueType::kString, "real", "real | syn | real+syn"},
  {"augment.count", ValueType::kInt, "0", "synthetic samples generated for augmentation"},
  {"sweep.axis", ValueType::kString, "target_labels", "target_labels | source_size"},
  {"sweep.grid", ValueType::kRealList, "0,0.5,1", "fractions visited by a sweep"},
  {"report.formats", ValueType::kStringList, "table,json,csv", "report formats written"},
  {"report.name", ValueType::kString, "", "label used in reports; defaults to the model name"},
};
// clang-format on

inline const KeySpec* FindKey(std::string_view key) {
  for (const auto& k : kConfigKeys) {
    if (k.key == key) return &k;
  }
  return nullptr;
}

namespace detail {

inline std::string Trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  if (Trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(Trim(item));
  return out;
}

inline bool ParseInt(const std::string& s, long long& v) {
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  return ec == std::errc() && p == end && !s.empty();
}

inline bool ParseReal(const std::string& s, double& v) {
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  return ec == std::errc() && p == end && !s.empty() && std::isfinite(v);
}

inline bool ParseBool(const std::string& s, bool& v) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return v = true, true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return v = false, true;
  return false;
}

inline std::string FormatShortest(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline std::string JoinList(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

// Type-checks `value` against `spec` and returns its canonical spelling, so
// "1", "1.0" and " 1 " resolve to the same setting.
inline std::string Canonicalize(const KeySpec& spec, const std::string& value) {
  auto bad = [&](const char* what) {
    Fail(ErrorKind::kConfig, "config key " + std::string(spec.key) + ": expected " + what +
                                 ", got \"" + value + "\"");
  };
  long long i;
  double r;
  bool b;
  std::vector<std::string> items;
  switch (spec.type) {
    case ValueType::kInt:
      if (!ParseInt(value, i)) bad("an integer");
      return std::to_string(i);
    case ValueType::kReal:
      if (!ParseReal(value, r)) bad("a number");
      return FormatShortest(r);
    case ValueType::kBool:
      if (!ParseBool(value, b)) bad("true or false");
      return b ? "true" : "false";
    case ValueType::kString:
      return value;
    case ValueType::kStringList:
      return JoinList(SplitList(value));
    case ValueType::kIntList:
      for (const auto& item : SplitList(value)) {
        if (!ParseInt(item, i)) bad("a comma-separated list of integers");
        items.push_back(std::to_string(i));
      }
      return JoinList(items);
    case ValueType::kRealList:
      for (const auto& item : SplitList(value)) {
        if (!ParseReal(item, r)) bad("a comma-separated list of numbers");
        items.push_back(FormatShortest(r));
      }
      return JoinList(items);
  }
  return value;
}

}  // namespace detail

// Resolved key/value settings: defaults overlaid by file entries and
// overrides, each checked against its declared type.
class Settings {
 public:
  Settings() {
    for (const auto& k : kConfigKeys) {
      values_[std::string(k.key)] = detail::Canonicalize(k, std::string(k.default_value));
    }
  }

  void Set(const std::string& key, const std::string& value) {
    const KeySpec* spec = FindKey(key);
    Require(spec != nullptr, ErrorKind::kConfig, "unknown config key \"" + key + "\"");
    values_[key] = detail::Canonicalize(*spec, detail::Trim(value));
  }

  // "key=value"
  void Override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    Require(eq != std::string::npos, ErrorKind::kConfig,
            "override \"" + assignment + "\" is not of the form key=value");
    Set(detail::Trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
  }

  void Parse(std::istream& is, const std::string& name = "config") {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      const std::string t = detail::Trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      Require(eq != std::string::npos, ErrorKind::kConfig,
              name + ":" + std::to_string(line_no) + ": expected key = value");
      try {
        Set(detail::Trim(t.substr(0, eq)), t.substr(eq + 1));
      } catch (const Error& e) {
        Fail(ErrorKind::kConfig, name + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
  }

  void Load(const std::string& path) {
    std::ifstream is(path);
    Require(static_cast<bool>(is), ErrorKind::kConfig, "cannot open config file " + path);
    Parse(is, path);
  }

  const std::string& Get(const std::string& key) const {
    auto it = values_.find(key);
    Require(it != values_.end(), ErrorKind::kConfig, "unknown config key \"" + key + "\"");
    return it->second;
  }

  long long Int(const std::string& key) const {
    long long v = 0;
    detail::ParseInt(Get(key), v);
    return v;
  }
  double Real(const std::string& key) const {
    double v = 0;
    detail::ParseReal(Get(key), v);
    return v;
  }
  bool Bool(const std::string& key) const {
    bool v = false;
    detail::ParseBool(Get(key), v);
    return v;
  }
  std::vector<std::string> StringList(const std::string& key) const {
    return detail::SplitList(Get(key));
  }
  std::vector<std::size_t> SizeList(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& s : detail::SplitList(Get(key))) {
      long long v = 0;
      detail::ParseInt(s, v);
      Require(v > 0, ErrorKind::kConfig, "config key " + key + ": entries must be positive");
      out.push_back(static_cast<std::size_t>(v));
    }
    return out;
  }
  std::vector<double> RealList(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : detail::SplitList(Get(key))) {
      double v = 0;
      detail::ParseReal(s, v);
      out.push_back(v);
    }
    return out;
  }

  // Canonical "key = value" lines in key order.
  std::string Serialize() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  // Hash of the settings that determine results (report.* excluded).
  std::string Fingerprint() const {
    io::Fnv1a h;
    for (const auto& [k, v] : values_) {
      if (k.rfind("report.", 0) == 0) continue;
      const std::string line = k + "=" + v + "\n";
      h.Update(line.data(), line.size());
    }
    return io::Hex64(h.Digest());
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  friend bool operator==(const Settings&, const Settings&) = default;

 private:
  std::map<std::string, std::string> values_;
};

enum class PretrainMode { kNone, kReconstruction, kSyntheticGeneration };

inline PretrainMode ParsePretrainMode(const std::string& s) {
  if (s == "none") return PretrainMode::kNone;
  if (s == "reconstruction") return PretrainMode::kReconstruction;
  if (s == "synthetic_generation") return PretrainMode::kSyntheticGeneration;
  Fail(ErrorKind::kConfig,
       "pretrain.mode must be none, reconstruction or synthetic_generation, got \"" + s + "\"");
}

enum class SweepAxis { kTargetLabels, kSourceSize };

inline SweepAxis ParseSweepAxis(const std::string& s) {
  if (s == "target_labels") return SweepAxis::kTargetLabels;
  if (s == "source_size") return SweepAxis::kSourceSize;
  Fail(ErrorKind::kConfig, "sweep.axis must be target_labels or source_size, got \"" + s + "\"");
}

// Typed view of Settings with range checks.
struct ExperimentConfig {
  Settings settings;

  std::string source, target, unlabelled, feature_root;
  data::LabelKind label_scheme = data::LabelKind::kCategorical4;
  double source_fraction = 1.0;
  double target_label_fraction = 0.0;
  bool language_id = false;
  std::vector<std::string> languages;

  int ablation = 1;
  model::ArchitectureConfig arch;
  model::AddiOptions addi;

  std::uint64_t seed = 1;
  int seeds = 10;
  std::size_t batch_size = 32;
  double lr = 1e-4;
  int patience = 5;
  double lr_factor = 0.5;
  double min_lr = 1e-5;
  int max_epochs = 200;
  double validation_fraction = 0.1;
  int validation_domain = 0;  // 0 source, 1 target
  double test_fraction = 0.2;

  PretrainMode pretrain = PretrainMode::kNone;
  std::string pretrain_encoder;
  int pretrain_epochs = 20;
  double pretrain_lr = 1e-4;
  std::size_t pretrain_batch_size = 32;

  pretext::AugmentMode augment = pretext::AugmentMode::kReal;
  long augment_count = 0;

  SweepAxis sweep_axis = SweepAxis::kTargetLabels;
  std::vector<double> sweep_grid;

  std::vector<std::string> report_formats;
  std::string report_name;

  static ExperimentConfig From(const Settings& s) {
    ExperimentConfig c;
    c.settings = s;
    auto fraction = [&](const std::string& key) {
      const double v = s.Real(key);
      Require(v >= 0.0 && v <= 1.0, ErrorKind::kConfig, key + " must lie in [0, 1]");
      return v;
    };
    auto positive = [&](const std::string& key) {
      const long long v = s.Int(key);
      Require(v > 0, ErrorKind::kConfig, key + " must be positive");
      return v;
    };
    c.source = s.Get("data.source");
    c.target = s.Get("data.target");
    c.unlabelled = s.Get("data.unlabelled");
    c.feature_root = s.Get("data.feature_root");
    try {
      c.label_scheme = data::ParseLabelKind(s.Get("data.label_scheme"));
    } catch (const Error& e) {
      Fail(ErrorKind::kConfig, std::string("data.label_scheme: ") + e.what());
    }
    c.source_fraction = fraction("data.source_fraction");
    Require(c.source_fraction > 0.0, ErrorKind::kConfig, "data.source_fraction must be > 0");
    c.target_label_fraction = fraction("data.target_label_fraction");
    c.language_id = s.Bool("data.language_id");
    c.languages = s.StringList("data.languages");
    Require(!c.language_id || !c.languages.empty(), ErrorKind::kConfig,
            "data.language_id needs data.languages");

    c.ablation = static_cast<int>(s.Int("model.ablation"));
    Require(c.ablation >= 1 && c.ablation <= 5, ErrorKind::kConfig,
            "model.ablation must be 1..5, got " + s.Get("model.ablation"));
    c.addi.lambda = s.Real("model.lambda");
    Require(c.addi.lambda >= 0.0, ErrorKind::kConfig, "model.lambda must be >= 0");
    c.addi.non_saturating = s.Bool("model.non_saturating");
    c.addi.routing = model::ParseFakeRouting(s.Get("model.fake_routing"));
    c.arch.conv_channels = s.SizeList("model.conv_channels");
    c.arch.conv_kernels = s.SizeList("model.conv_kernels");
    c.arch.pool = static_cast<std::size_t>(positive("model.pool"));
    c.arch.latent = static_cast<std::size_t>(positive("model.latent"));
    c.arch.hidden = s.SizeList("model.hidden");
    c.arch.dropout = s.Real("model.dropout");
    c.arch.n_classes = static_cast<std::size_t>(data::NumClasses(c.label_scheme));
    c.arch.language_dim = c.language_id ? c.languages.size() : 0;

    c.seed = static_cast<std::uint64_t>(s.Int("train.seed"));
    c.seeds = static_cast<int>(positive("train.seeds"));
    c.batch_size = static_cast<std::size_t>(s.Int("train.batch_size"));
    Require(c.batch_size >= 2, ErrorKind::kConfig, "train.batch_size must be at least 2");
    c.lr = s.Real("train.lr");
    Require(c.lr > 0.0, ErrorKind::kConfig, "train.lr must be positive");
    c.patience = static_cast<int>(positive("train.patience"));
    c.lr_factor = s.Real("train.lr_factor");
    Require(c.lr_factor > 0.0 && c.lr_factor < 1.0, ErrorKind::kConfig,
            "train.lr_factor must lie in (0, 1)");
    c.min_lr = s.Real("train.min_lr");
    c.max_epochs = static_cast<int>(positive("train.max_epochs"));
    c.validation_fraction = fraction("train.validation_fraction");
    {
      const std::string v = s.Get("train.validation_domain");
      Require(v == "source" || v == "target", ErrorKind::kConfig,
              "train.validation_domain must be source or target, got '" + v + "'");
      c.validation_domain = v == "target" ? 1 : 0;
    }
    c.test_fraction = fraction("train.test_fraction");
    Require(c.test_fraction > 0.0 && c.test_fraction < 1.0, ErrorKind::kConfig,
            "train.test_fraction must lie in (0, 1)");

    c.pretrain = ParsePretrainMode(s.Get("pretrain.mode"));
    c.pretrain_encoder = s.Get("pretrain.encoder");
    c.pretrain_epochs = static_cast<int>(positive("pretrain.epochs"));
    c.pretrain_lr = s.Real("pretrain.lr");
    Require(c.pretrain_lr > 0.0, ErrorKind::kConfig, "pretrain.lr must be positive");
    c.pretrain_batch_size = static_cast<std::size_t>(positive("pretrain.batch_size"));

    c.augment = pretext::ParseAugmentMode(s.Get("augment.mode"));
    c.augment_count = static_cast<long>(s.Int("augment.count"));
    if (c.augment != pretext::AugmentMode::kReal) {
      Require(c.augment_count > 0, ErrorKind::kConfig,
              "augment.mode " + s.Get("augment.mode") + " needs augment.count > 0");
      Require(c.pretrain == PretrainMode::kSyntheticGeneration, ErrorKind::kConfig,
              "synthetic augmentation needs pretrain.mode = synthetic_generation");
    }

    c.sweep_axis = ParseSweepAxis(s.Get("sweep.axis"));
    c.sweep_grid = s.RealList("sweep.grid");
    c.report_formats = s.StringList("report.formats");
    for (const auto& f : c.report_formats) {
      Require(f == "table" || f == "json" || f == "csv", ErrorKind::kConfig,
              "report.formats entries must be table, json or csv, got \"" + f + "\"");
    }
    c.report_name = s.Get("report.name");

    try {
      c.arch.Validate();
    } catch (const Error& e) {
      Fail(ErrorKind::kConfig, e.what());
    }
    return c;
  }

  std::string Name() const {
    if (!report_name.empty()) return report_name;
    static const char* kNames[] = {"", "ADDi", "ADDi-Ds", "ADDi-Dt", "AE+C", "CNN"};
    std::string n = kNames[ablation];
    if (pretrain != PretrainMode::kNone) n = "s" + n;
    return n;
  }
};

inline ExperimentConfig LoadExperimentConfig(const std::string& path,
                                             const std::vector<std::string>& overrides = {}) {
  Settings s;
  if (!path.empty()) s.Load(path);
  for (const auto& o : overrides) s.Override(o);
  return ExperimentConfig::From(s);
}

}  // namespace addi::eval
