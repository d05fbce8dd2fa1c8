// addi/pretext/pretext.hpp

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

// Class-conditional pretext GAN on pseudo-labelled unlabelled speech, in the
// balancing-GAN style:
//
//   E   encoder, same layout and names as the adaptation model's E
//   Gp  generator, [z | one-hot y_p] -> 1 x n_mels x T
//   Dp  conv trunk + dense stack with n_pseudo + 1 logits, the last one "fake"
//
// The discriminator scores real rows against their pseudo-label and generated
// rows against the fake class; the generator (and E through z) is pushed
// toward the requested pseudo-label. A reconstruction mode trains E + Gp as an
// autoencoder with an all-zero class code instead.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "addi/autodiff/adam.hpp"
#include "addi/autodiff/checkpoint.hpp"
#include "addi/data/manifest.hpp"
#include "addi/model/layers.hpp"

namespace addi::pretext {

using ad::Tape;
using ad::Tensor;
using ad::Var;
using model::ArchitectureConfig;

inline constexpr const char* kEncoderNs = "E";
inline constexpr const char* kGeneratorNs = "Gp";
inline constexpr const char* kDiscriminatorNs = "Dp";
inline constexpr int kPseudoClasses = 4;

template <typename T>
class PretextModel {
 public:
  PretextModel(const ArchitectureConfig& cfg, std::uint64_t seed, int n_pseudo = kPseudoClasses)
      : cfg_(cfg), n_pseudo_(n_pseudo) {
    cfg_.Validate();
    Require(n_pseudo >= 2, ErrorKind::kConfig, "need at least two pseudo classes");
    // Same stream name as the adaptation model, so equal seeds give equal E.
    Rng e_rng(DeriveSeed(seed, "init.E"));
    model::AddConvTrunk(store_, cfg_, kEncoderNs, e_rng);
    model::AddDense(store_, std::string(kEncoderNs) + ".proj", cfg_.TrunkSize(), cfg_.latent,
                    model::detail::kLeCunGain, e_rng);
    Rng g_rng(DeriveSeed(seed, "init.Gp"));
    model::AddGenerator(store_, cfg_, kGeneratorNs, static_cast<std::size_t>(n_pseudo_), g_rng);
    Rng d_rng(DeriveSeed(seed, "init.Dp"));
    model::AddConvTrunk(store_, cfg_, kDiscriminatorNs, d_rng);
    model::AddMlp(store_, kDiscriminatorNs, cfg_.TrunkSize(), cfg_.hidden,
                  static_cast<std::size_t>(n_pseudo_ + 1), d_rng);
  }

  const ArchitectureConfig& config() const { return cfg_; }
  int n_pseudo() const { return n_pseudo_; }
  int fake_class() const { return n_pseudo_; }
  ad::ParameterStore<T>& params() { return store_; }
  const ad::ParameterStore<T>& params() const { return store_; }

  Var<T> Encode(Tape<T>& tape, const Var<T>& x, bool trainable = true) {
    Var<T> h = model::RunConvTrunk(tape, store_, cfg_, kEncoderNs, x, trainable);
    return model::RunDense(tape, store_, std::string(kEncoderNs) + ".proj", h, trainable);
  }

  Var<T> Generate(Tape<T>& tape, const Var<T>& z, const Var<T>& code, bool trainable = true) {
    Require(code.shape().size() == 2 && code.dim(1) == static_cast<std::size_t>(n_pseudo_),
            ErrorKind::kDimension,
            "pseudo-label codes must be N x " + std::to_string(n_pseudo_));
    return model::RunGenerator(tape, store_, cfg_, kGeneratorNs, z, code, trainable);
  }

  // N x (n_pseudo + 1) logits.
  Var<T> DiscriminatorLogits(Tape<T>& tape, const Var<T>& x, bool trainable = true) {
    Var<T> h = model::RunConvTrunk(tape, store_, cfg_, kDiscriminatorNs, x, trainable);
    return model::RunMlp(tape, store_, kDiscriminatorNs, h, trainable);
  }

  Tensor<T> GenerateEval(const Tensor<T>& z, const Tensor<T>& code) {
    Tape<T> tape(false);
    return Generate(tape, tape.Constant(z), tape.Constant(code), false).value();
  }

  Tensor<T> EncodeEval(const Tensor<T>& x) {
    Tape<T> tape(false);
    return Encode(tape, tape.Constant(x), false).value();
  }

  Tensor<T> DiscriminatorProbs(const Tensor<T>& x) {
    Tape<T> tape(false);
    return ad::Softmax(DiscriminatorLogits(tape, tape.Constant(x), false).value());
  }

  Tensor<T> OneHot(const std::vector<int>& labels) const {
    Tensor<T> code({labels.size(), static_cast<std::size_t>(n_pseudo_)});
    for (std::size_t i = 0; i < labels.size(); ++i) {
      Require(labels[i] >= 0 && labels[i] < n_pseudo_, ErrorKind::kInvalidInput,
              "pseudo-label " + std::to_string(labels[i]) + " outside [0, " +
                  std::to_string(n_pseudo_) + ")");
      code[i * static_cast<std::size_t>(n_pseudo_) + static_cast<std::size_t>(labels[i])] = T(1);
    }
    return code;
  }

 private:
  ArchitectureConfig cfg_;
  int n_pseudo_;
  ad::ParameterStore<T> store_;
};

template <typename T>
struct PretextOptimizers {
  ad::AdamState<T> discriminator, generator, reconstruction;

  std::map<std::string, const ad::AdamState<T>*> Named() const {
    return {{"discriminator", &discriminator},
            {"generator", &generator},
            {"reconstruction", &reconstruction}};
  }
};

struct PretextReport {
  double l_d_real = 0.0;   // cross-entropy of real rows against their pseudo-labels
  double l_d_fake = 0.0;   // cross-entropy of generated rows against the fake class
  double l_g = 0.0;        // generator cross-entropy toward the requested class
  double fake_prob = 0.0;  // mean fake-class probability of generated rows, before the G update
};

// Discriminator loss terms (real, fake) on constant inputs.
template <typename T>
std::pair<Var<T>, Var<T>> PretextDiscriminatorLoss(PretextModel<T>& m, Tape<T>& tape,
                                                   const Tensor<T>& real,
                                                   const std::vector<int>& pseudo,
                                                   const Tensor<T>& fake) {
  auto real_ce = ad::SoftmaxCrossEntropy(m.DiscriminatorLogits(tape, tape.Constant(real)), pseudo);
  std::vector<int> fake_labels(fake.dim(0), m.fake_class());
  auto fake_ce =
      ad::SoftmaxCrossEntropy(m.DiscriminatorLogits(tape, tape.Constant(fake)), fake_labels);
  return {real_ce, fake_ce};
}

// Generator loss: cross-entropy of D_p on G_p(E(x), y) against y, with D_p
// held constant.
template <typename T>
Var<T> PretextGeneratorLoss(PretextModel<T>& m, Tape<T>& tape, const Tensor<T>& real,
                            const std::vector<int>& pseudo) {
  Var<T> fake = m.Generate(tape, m.Encode(tape, tape.Constant(real)),
                           tape.Constant(m.OneHot(pseudo)));
  return ad::SoftmaxCrossEntropy(m.DiscriminatorLogits(tape, fake, false), pseudo);
}

// One D-then-G alternation on a pseudo-labelled batch.
template <typename T>
PretextReport PretextTrainStep(PretextModel<T>& m, const Tensor<T>& real,
                               const std::vector<int>& pseudo, PretextOptimizers<T>& opt,
                               double lr) {
  Require(!pseudo.empty() && pseudo.size() == real.dim(0), ErrorKind::kInvalidInput,
          "pretext step needs one pseudo-label per row");
  PretextReport rep;
  const Tensor<T> code = m.OneHot(pseudo);
  auto& store = m.params();

  {
    const Tensor<T> fake = m.GenerateEval(m.EncodeEval(real), code);
    store.ZeroGrad();
    Tape<T> tape;
    auto [real_ce, fake_ce] = PretextDiscriminatorLoss(m, tape, real, pseudo, fake);
    rep.l_d_real = static_cast<double>(real_ce.value()[0]);
    rep.l_d_fake = static_cast<double>(fake_ce.value()[0]);
    Require(std::isfinite(rep.l_d_real) && std::isfinite(rep.l_d_fake), ErrorKind::kNumeric,
            "non-finite pretext discriminator loss");
    tape.Backward(ad::Add(real_ce, fake_ce));
    AdamStep(store.InNamespaces({kDiscriminatorNs}), opt.discriminator, lr);
  }
  {
    store.ZeroGrad();
    Tape<T> tape;
    Var<T> fake = m.Generate(tape, m.Encode(tape, tape.Constant(real)), tape.Constant(code));
    Var<T> logits = m.DiscriminatorLogits(tape, fake, false);
    const Tensor<T> probs = ad::Softmax(logits.value());
    const std::size_t k = probs.dim(1);
    double s = 0.0;
    for (std::size_t i = 0; i < probs.dim(0); ++i) s += static_cast<double>(probs[i * k + k - 1]);
    rep.fake_prob = s / static_cast<double>(probs.dim(0));
    Var<T> loss = ad::SoftmaxCrossEntropy(logits, pseudo);
    rep.l_g = static_cast<double>(loss.value()[0]);
    Require(std::isfinite(rep.l_g), ErrorKind::kNumeric, "non-finite pretext generator loss");
    tape.Backward(loss);
    AdamStep(store.InNamespaces({kEncoderNs, kGeneratorNs}), opt.generator, lr);
  }
  return rep;
}

// Reconstruction pretext: E + Gp on ||X - Gp(E(X), 0)||^2. Returns the loss.
template <typename T>
double ReconstructionStep(PretextModel<T>& m, const Tensor<T>& real, PretextOptimizers<T>& opt,
                          double lr) {
  auto& store = m.params();
  store.ZeroGrad();
  Tape<T> tape;
  Var<T> x = tape.Constant(real);
  Tensor<T> zero_code({real.dim(0), static_cast<std::size_t>(m.n_pseudo())});
  Var<T> loss = ad::SquaredError(x, m.Generate(tape, m.Encode(tape, x), tape.Constant(zero_code)));
  const double v = static_cast<double>(loss.value()[0]);
  Require(std::isfinite(v), ErrorKind::kNumeric, "non-finite reconstruction loss");
  tape.Backward(loss);
  AdamStep(store.InNamespaces({kEncoderNs, kGeneratorNs}), opt.reconstruction, lr);
  return v;
}

// --- synthesis ----------------------------------------------------------------

// Largest-remainder split of `count` by non-negative weights; ties go to the
// lower class index.
inline std::vector<std::size_t> ApportionByWeight(const std::vector<double>& weights,
                                                  std::size_t count) {
  double total = 0.0;
  for (double w : weights) {
    Require(std::isfinite(w) && w >= 0.0, ErrorKind::kInvalidInput,
            "class balance weights must be finite and non-negative");
    total += w;
  }
  Require(total > 0.0, ErrorKind::kInvalidInput, "class balance weights sum to zero");
  std::vector<std::size_t> out(weights.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    const double ideal = static_cast<double>(count) * weights[c] / total;
    out[c] = static_cast<std::size_t>(std::floor(ideal));
    assigned += out[c];
    rem.emplace_back(ideal - std::floor(ideal), c);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < count; ++i, ++assigned) ++out[rem[i % rem.size()].second];
  return out;
}

struct SyntheticSample {
  signal::FeatureMatrix features;
  int label = 0;
  std::string provenance;  // generator parameter hash
};

// `count` samples with z ~ N(0, I) and labels split by `class_balance`
// (uniform when empty). Deterministic in (model, count, balance, seed).
template <typename T>
std::vector<SyntheticSample> GenerateSynthetic(PretextModel<T>& m, long count,
                                               std::vector<double> class_balance,
                                               std::uint64_t seed, std::size_t chunk = 64) {
  Require(count > 0, ErrorKind::kInvalidInput,
          "synthetic sample count must be positive, got " + std::to_string(count));
  if (class_balance.empty()) class_balance.assign(static_cast<std::size_t>(m.n_pseudo()), 1.0);
  Require(class_balance.size() == static_cast<std::size_t>(m.n_pseudo()), ErrorKind::kInvalidInput,
          "class balance must list one weight per class");
  const auto per_class = ApportionByWeight(class_balance, static_cast<std::size_t>(count));
  std::vector<int> labels;
  for (std::size_t c = 0; c < per_class.size(); ++c) labels.insert(labels.end(), per_class[c], int(c));
  Rng rng(seed);
  rng.Shuffle(labels);

  const auto& cfg = m.config();
  const std::string provenance = "Gp:" + io::Hex64(m.params().Hash(kGeneratorNs));
  std::vector<SyntheticSample> out;
  out.reserve(labels.size());
  for (std::size_t start = 0; start < labels.size(); start += chunk) {
    const std::size_t n = std::min(chunk, labels.size() - start);
    std::vector<int> y(labels.begin() + static_cast<std::ptrdiff_t>(start),
                       labels.begin() + static_cast<std::ptrdiff_t>(start + n));
    Tensor<T> z({n, cfg.latent});
    for (auto& v : z.storage()) v = static_cast<T>(rng.Normal());
    const Tensor<T> x = m.GenerateEval(z, m.OneHot(y));
    const std::size_t plane = cfg.n_mels * cfg.n_frames;
    for (std::size_t i = 0; i < n; ++i) {
      SyntheticSample s;
      s.features.n_mels = cfg.n_mels;
      s.features.n_frames = cfg.n_frames;
      s.features.n_frames_valid = cfg.n_frames;
      s.features.values.resize(plane);
      for (std::size_t j = 0; j < plane; ++j) s.features.values[j] = static_cast<float>(x[i * plane + j]);
      s.label = y[i];
      s.provenance = provenance;
      out.push_back(std::move(s));
    }
  }
  return out;
}

// Synthetic samples as source-domain utterances with categorical labels.
inline std::vector<data::Utterance> SyntheticUtterances(const std::vector<SyntheticSample>& samples,
                                                        const std::string& prefix = "syn") {
  std::vector<data::Utterance> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    data::UtteranceRecord r;
    r.id = prefix + "-" + std::to_string(i);
    r.corpus_id = "synthetic";
    r.domain = 0;
    r.label = data::Label{data::LabelKind::kCategorical4, samples[i].label};
    out.push_back({r, std::make_shared<const signal::FeatureMatrix>(samples[i].features)});
  }
  return out;
}

// Writes one feature cache per sample under `dir` plus dir/manifest.tsv.
inline std::vector<data::UtteranceRecord> WriteSyntheticSet(
    const std::string& dir, const std::vector<SyntheticSample>& samples) {
  std::filesystem::create_directories(dir);
  std::vector<data::UtteranceRecord> records;
  for (const auto& u : SyntheticUtterances(samples)) {
    auto r = u.record;
    r.feature_path = r.id + ".fb";
    signal::WriteFeatureCache(dir + "/" + r.feature_path, *u.features);
    records.push_back(r);
  }
  data::WriteManifest(dir + "/manifest.tsv", records);
  return records;
}

// --- encoder interchange ---------------------------------------------------------

// Checkpoint holding only the encoder namespace.
template <typename T>
ad::Checkpoint ExportEncoder(const PretextModel<T>& m) {
  return ad::MakeCheckpoint(m.params(), {kEncoderNs});
}

// Loads an encoder checkpoint into any model with an "E" namespace. Differing
// names or shapes raise a compatibility error that lists them.
template <typename Model>
void ImportEncoder(const ad::Checkpoint& ckpt, Model& target) {
  ad::LoadParameters(ckpt, target.params(), {kEncoderNs});
}

// --- augmentation -----------------------------------------------------------------

enum class AugmentMode { kReal, kSynthetic, kRealPlusSynthetic };

inline AugmentMode ParseAugmentMode(const std::string& s) {
  if (s == "real") return AugmentMode::kReal;
  if (s == "syn") return AugmentMode::kSynthetic;
  if (s == "real+syn") return AugmentMode::kRealPlusSynthetic;
  Fail(ErrorKind::kConfig, "augment mode must be real, syn or real+syn, got \"" + s + "\"");
}

inline std::string AugmentModeName(AugmentMode m) {
  switch (m) {
    case AugmentMode::kReal: return "real";
    case AugmentMode::kSynthetic: return "syn";
    case AugmentMode::kRealPlusSynthetic: return "real+syn";
  }
  return "?";
}

inline std::vector<data::Utterance> AugmentDataset(const std::vector<data::Utterance>& source_train,
                                                   const std::vector<data::Utterance>& synthetic,
                                                   AugmentMode mode) {
  switch (mode) {
    case AugmentMode::kReal:
      return source_train;
    case AugmentMode::kSynthetic:
      Require(!synthetic.empty(), ErrorKind::kInvalidInput,
              "augment mode syn needs a non-empty synthetic set");
      return synthetic;
    case AugmentMode::kRealPlusSynthetic: {
      auto out = source_train;
      out.insert(out.end(), synthetic.begin(), synthetic.end());
      return out;
    }
  }
  return source_train;
}

}  // namespace addi::pretext
