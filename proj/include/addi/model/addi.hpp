// addi/model/addi.hpp

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

// Adversarial dual-discriminator network. Components and their parameter
// namespaces:
//
//   E   conv encoder, 1 x n_mels x T  ->  latent z (linear, `latent` wide)
//   Gd  generator, [z | one-hot d]  ->  1 x n_mels x T
//   Ds  source discriminator, features -> P(real source)
//   Dt  target discriminator, features -> P(real target)
//   Cd  classifier on z (optionally with a language one-hot appended)
//
// The autoencoder stage decodes each row with its own domain code. By default
// the adversarial stages decode every row twice: with d = 0 for Ds and with
// d = 1 for Dt. Ds compares its fakes with real source rows and Dt with real
// target rows.

#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "addi/autodiff/adam.hpp"
#include "addi/data/batches.hpp"
#include "addi/model/layers.hpp"

namespace addi::model {

inline constexpr const char* kEncoderNs = "E";
inline constexpr const char* kGeneratorNs = "Gd";
inline constexpr const char* kSourceDiscNs = "Ds";
inline constexpr const char* kTargetDiscNs = "Dt";
inline constexpr const char* kClassifierNs = "Cd";

inline constexpr double kProbEps = 1e-7;

// Which optional parts a variant carries; E and Cd are always present.
struct Components {
  bool generator = true;
  bool source_disc = true;
  bool target_disc = true;

  friend bool operator==(const Components&, const Components&) = default;
};

// Ablation ladder: 1 full, 2 Ds only, 3 Dt only, 4 autoencoder + classifier,
// 5 encoder + classifier.
inline Components AblationComponents(int id) {
  switch (id) {
    case 1: return {true, true, true};
    case 2: return {true, true, false};
    case 3: return {true, false, true};
    case 4: return {true, false, false};
    case 5: return {false, false, false};
  }
  Fail(ErrorKind::kInvalidInput, "ablation model id must be 1..5, got " + std::to_string(id));
}

// Which generated rows each discriminator judges; see FakesFor.
enum class FakeRouting { kCrossDomain, kOwnDomain };

inline FakeRouting ParseFakeRouting(const std::string& s) {
  if (s == "cross") return FakeRouting::kCrossDomain;
  if (s == "own") return FakeRouting::kOwnDomain;
  Fail(ErrorKind::kConfig, "fake routing must be cross or own, got \"" + s + "\"");
}

struct AddiOptions {
  double lambda = 1.0;
  bool non_saturating = false;  // -log D(fake) instead of log(1 - D(fake))
  double eps = kProbEps;
  FakeRouting routing = FakeRouting::kCrossDomain;
};

// One-hot rows: [1, 0] for d = 0, [0, 1] for d = 1.
template <typename T>
Tensor<T> DomainOneHot(const std::vector<int>& domains) {
  Tensor<T> codes({domains.size(), 2});
  for (std::size_t i = 0; i < domains.size(); ++i) {
    Require(domains[i] == 0 || domains[i] == 1, ErrorKind::kInvalidInput,
            "domain code must be 0 or 1");
    codes[i * 2 + static_cast<std::size_t>(domains[i])] = T(1);
  }
  return codes;
}

template <typename T>
class AddiModel {
 public:
  AddiModel(const ArchitectureConfig& cfg, Components comps, std::uint64_t seed)
      : cfg_(cfg), comps_(comps) {
    cfg_.Validate();
    Rng e_rng(DeriveSeed(seed, "init.E"));
    AddConvTrunk(store_, cfg_, kEncoderNs, e_rng);
    AddDense(store_, std::string(kEncoderNs) + ".proj", cfg_.TrunkSize(), cfg_.latent,
             detail::kLeCunGain, e_rng);
    if (comps_.generator) {
      Rng g_rng(DeriveSeed(seed, "init.Gd"));
      AddGenerator(store_, cfg_, kGeneratorNs, 2, g_rng);
    }
    const std::size_t feat = cfg_.n_mels * cfg_.n_frames;
    if (comps_.source_disc) {
      Rng rng(DeriveSeed(seed, "init.Ds"));
      AddMlp(store_, kSourceDiscNs, feat, cfg_.hidden, 1, rng);
    }
    if (comps_.target_disc) {
      Rng rng(DeriveSeed(seed, "init.Dt"));
      AddMlp(store_, kTargetDiscNs, feat, cfg_.hidden, 1, rng);
    }
    Rng c_rng(DeriveSeed(seed, "init.Cd"));
    AddMlp(store_, kClassifierNs, cfg_.latent + cfg_.language_dim, cfg_.hidden, cfg_.n_classes,
           c_rng);
  }

  const ArchitectureConfig& config() const { return cfg_; }
  const Components& components() const { return comps_; }
  ParameterStore<T>& params() { return store_; }
  const ParameterStore<T>& params() const { return store_; }

  bool HasDiscriminator(int domain) const {
    return domain == 0 ? comps_.source_disc : comps_.target_disc;
  }

  // x: N x 1 x n_mels x T  ->  N x latent
  Var<T> Encode(Tape<T>& tape, const Var<T>& x, bool trainable = true) {
    Var<T> h = RunConvTrunk(tape, store_, cfg_, kEncoderNs, x, trainable);
    return RunDense(tape, store_, std::string(kEncoderNs) + ".proj", h, trainable);
  }

  Var<T> Generate(Tape<T>& tape, const Var<T>& z, const Var<T>& codes, bool trainable = true) {
    Require(comps_.generator, ErrorKind::kInvalidInput, "this model variant has no generator");
    Require(codes.shape().size() == 2 && codes.dim(1) == 2, ErrorKind::kDimension,
            "domain codes must be N x 2");
    return RunGenerator(tape, store_, cfg_, kGeneratorNs, z, codes, trainable);
  }

  // Probability that each row is real data of `domain`; N x 1.
  Var<T> Discriminate(Tape<T>& tape, int domain, const Var<T>& x, bool trainable = true) {
    Require(HasDiscriminator(domain), ErrorKind::kInvalidInput,
            std::string("this model variant has no ") + DiscNs(domain) + " discriminator");
    Require(x.shape().size() == 4 && x.dim(2) == cfg_.n_mels && x.dim(3) == cfg_.n_frames,
            ErrorKind::kDimension,
            "discriminator expects N x 1 x " + std::to_string(cfg_.n_mels) + " x " +
                std::to_string(cfg_.n_frames) + ", got " + ad::ShapeString(x.shape()));
    return ad::Sigmoid(RunMlp(tape, store_, DiscNs(domain), ad::Flatten(x), trainable));
  }

  Var<T> ClassLogits(Tape<T>& tape, const Var<T>& z, const Var<T>* language, bool trainable,
                     Rng* dropout_rng, bool training) {
    Var<T> in = z;
    if (cfg_.language_dim > 0) {
      Require(language != nullptr && language->shape().size() == 2 &&
                  language->dim(1) == cfg_.language_dim && language->dim(0) == z.dim(0),
              ErrorKind::kDimension,
              "classifier expects N x " + std::to_string(cfg_.language_dim) + " language codes");
      in = ad::ConcatColumns(z, *language);
    }
    return RunMlp(tape, store_, kClassifierNs, in, trainable, cfg_.dropout, dropout_rng, training);
  }

  // Evaluation-mode helpers: no dropout, no gradient bookkeeping.
  Tensor<T> EncodeEval(const Tensor<T>& x) {
    Tape<T> tape(false);
    return Encode(tape, tape.Constant(x), false).value();
  }

  Tensor<T> GenerateEval(const Tensor<T>& z, const std::vector<int>& domains) {
    Tape<T> tape(false);
    return Generate(tape, tape.Constant(z), tape.Constant(DomainOneHot<T>(domains)), false)
        .value();
  }

  Tensor<T> LogitsEval(const Tensor<T>& x, const Tensor<T>* language = nullptr) {
    Tape<T> tape(false);
    Var<T> z = Encode(tape, tape.Constant(x), false);
    std::optional<Var<T>> lang;
    if (language) lang = tape.Constant(*language);
    return ClassLogits(tape, z, lang ? &*lang : nullptr, false, nullptr, false).value();
  }

  // Class distribution per row.
  Tensor<T> Classify(const Tensor<T>& x, const Tensor<T>* language = nullptr) {
    return ad::Softmax(LogitsEval(x, language));
  }

  static const char* DiscNs(int domain) { return domain == 0 ? kSourceDiscNs : kTargetDiscNs; }

 private:
  ArchitectureConfig cfg_;
  Components comps_;
  ParameterStore<T> store_;
};

// --- losses ----------------------------------------------------------------

// ||X - Xbar||^2 per row, averaged over the batch.
template <typename T>
Var<T> LossAutoencoder(const Var<T>& x, const Var<T>& xbar) {
  return ad::SquaredError(x, xbar);
}

// E[-log D(real)] + E[-log(1 - D(fake))], probabilities clamped to [eps, 1-eps].
template <typename T>
Var<T> DiscriminatorLoss(const Var<T>& real_probs, const Var<T>& fake_probs, double eps = kProbEps) {
  auto real = ad::MeanLogProb(real_probs, false, T(eps));
  auto fake = ad::MeanLogProb(fake_probs, true, T(eps));
  return ad::Scale(ad::Add(real, fake), T(-1));
}

// Generator's adversarial term against one discriminator: E[log(1 - D(fake))],
// or E[-log D(fake)] in the non-saturating variant.
template <typename T>
Var<T> AdversarialTerm(const Var<T>& fake_probs, bool non_saturating, double eps = kProbEps) {
  if (non_saturating) return ad::Scale(ad::MeanLogProb(fake_probs, false, T(eps)), T(-1));
  return ad::MeanLogProb(fake_probs, true, T(eps));
}

inline std::vector<std::size_t> RowsOfDomain(const std::vector<int>& domains, int d) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    if (domains[i] == d) rows.push_back(i);
  }
  return rows;
}

// Fakes judged by discriminator `d`: every row decoded with code d
// (kCrossDomain), or only the rows of domain d decoded with their own code
// (kOwnDomain). `own_fake` is G(z, own codes) and is reused for kOwnDomain.
template <typename T>
std::optional<Var<T>> FakesFor(AddiModel<T>& model, Tape<T>& tape, int d, const Var<T>& z,
                               const Var<T>& own_fake, const std::vector<int>& domains,
                               FakeRouting routing, bool trainable = true) {
  if (routing == FakeRouting::kOwnDomain) {
    auto rows = RowsOfDomain(domains, d);
    if (rows.empty()) return std::nullopt;
    return ad::GatherRows(own_fake, rows);
  }
  std::vector<int> codes(domains.size(), d);
  return model.Generate(tape, z, tape.Constant(DomainOneHot<T>(codes)), trainable);
}

template <typename T>
struct GeneratorLoss {
  Var<T> total;               // L_AE + lambda * L_adv
  Var<T> ae;                  // L_AE
  std::optional<Var<T>> adv;  // L_G_adv; absent without discriminators or fakes
};

// L_G on a batch. The discriminators enter as constants.
template <typename T>
GeneratorLoss<T> LossGenerator(AddiModel<T>& model, Tape<T>& tape, const Tensor<T>& features,
                               const std::vector<int>& domains, const AddiOptions& opt) {
  Require(features.rank() == 4 && features.dim(0) == domains.size(), ErrorKind::kDimension,
          "generator loss: one domain code per feature row required");
  Var<T> x = tape.Constant(features);
  Var<T> z = model.Encode(tape, x);
  Var<T> fake = model.Generate(tape, z, tape.Constant(DomainOneHot<T>(domains)));
  GeneratorLoss<T> out;
  out.ae = LossAutoencoder(x, fake);
  for (int d : {0, 1}) {
    if (!model.HasDiscriminator(d)) continue;
    auto f = FakesFor(model, tape, d, z, fake, domains, opt.routing);
    if (!f) continue;
    auto probs = model.Discriminate(tape, d, *f, false);
    auto term = AdversarialTerm(probs, opt.non_saturating, opt.eps);
    out.adv = out.adv ? ad::Add(*out.adv, term) : term;
  }
  out.total = out.adv ? ad::Add(out.ae, ad::Scale(*out.adv, T(opt.lambda))) : out.ae;
  return out;
}

// L_D for discriminator `domain` given real rows of that domain and fakes
// generated with its code. Both inputs are constants (stop-gradient).
template <typename T>
Var<T> LossDiscriminator(AddiModel<T>& model, Tape<T>& tape, int domain, const Tensor<T>& real,
                         const Tensor<T>& fake, const AddiOptions& opt) {
  auto p_real = model.Discriminate(tape, domain, tape.Constant(real));
  auto p_fake = model.Discriminate(tape, domain, tape.Constant(fake));
  return DiscriminatorLoss(p_real, p_fake, opt.eps);
}

template <typename T>
Var<T> LossClassifier(AddiModel<T>& model, Tape<T>& tape, const Tensor<T>& features,
                      const std::vector<int>& labels, const Tensor<T>* language, Rng* dropout_rng,
                      bool training) {
  Require(!labels.empty(), ErrorKind::kInvalidInput, "classifier loss needs labelled rows");
  Var<T> z = model.Encode(tape, tape.Constant(features));
  std::optional<Var<T>> lang;
  if (language) lang = tape.Constant(*language);
  auto logits = model.ClassLogits(tape, z, lang ? &*lang : nullptr, true, dropout_rng, training);
  return ad::SoftmaxCrossEntropy(logits, labels);
}

// --- staged training step ----------------------------------------------------

enum class Stage { kAutoencoder = 0, kAdversarial, kSourceDisc, kTargetDisc, kClassifier };
inline constexpr std::array<Stage, 5> kStages = {Stage::kAutoencoder, Stage::kAdversarial,
                                                 Stage::kSourceDisc, Stage::kTargetDisc,
                                                 Stage::kClassifier};

inline const char* StageName(Stage s) {
  switch (s) {
    case Stage::kAutoencoder: return "autoencoder";
    case Stage::kAdversarial: return "adversarial";
    case Stage::kSourceDisc: return "source_discriminator";
    case Stage::kTargetDisc: return "target_discriminator";
    case Stage::kClassifier: return "classifier";
  }
  return "?";
}

// Parameter namespaces each stage may change.
inline std::set<std::string> StageNamespaces(Stage s) {
  switch (s) {
    case Stage::kAutoencoder:
    case Stage::kAdversarial: return {kEncoderNs, kGeneratorNs};
    case Stage::kSourceDisc: return {kSourceDiscNs};
    case Stage::kTargetDisc: return {kTargetDiscNs};
    case Stage::kClassifier: return {kEncoderNs, kClassifierNs};
  }
  return {};
}

// Independent Adam state per stage.
template <typename T>
struct StageOptimizers {
  std::array<ad::AdamState<T>, 5> states;

  ad::AdamState<T>& operator[](Stage s) { return states[static_cast<std::size_t>(s)]; }

  std::map<std::string, const ad::AdamState<T>*> Named() const {
    std::map<std::string, const ad::AdamState<T>*> out;
    for (Stage s : kStages) out[StageName(s)] = &states[static_cast<std::size_t>(s)];
    return out;
  }
};

struct StepReport {
  std::optional<double> l_ae, l_g_adv, l_ds, l_dt, l_c;
  std::array<bool, 5> updated{};
  std::vector<std::string> warnings;
  std::vector<std::string> labelled_ids;  // rows whose labels reached the classifier loss

  bool Updated(Stage s) const { return updated[static_cast<std::size_t>(s)]; }
};

// Called with (stage, before) around every stage, executed or not.
using StageObserver = std::function<void(Stage, bool before)>;

namespace detail {

template <typename T>
double CheckedScalar(const Var<T>& loss, Stage s) {
  const double v = static_cast<double>(loss.value()[0]);
  Require(std::isfinite(v), ErrorKind::kNumeric,
          std::string("non-finite loss in stage ") + StageName(s));
  return v;
}

template <typename T>
void ApplyStage(AddiModel<T>& model, Tape<T>& tape, const Var<T>& loss, Stage s,
                StageOptimizers<T>& opt, double lr) {
  tape.Backward(loss);
  AdamStep(model.params().InNamespaces(StageNamespaces(s)), opt[s], lr);
}

}  // namespace detail

// One training step: (1) E+Gd on L_AE; (2) E+Gd on lambda * L_G_adv;
// (3) Ds on d = 0 fakes vs real source; (4) Dt on d = 1 fakes vs real target;
// (5) E+Cd on cross-entropy over labelled rows. Fakes for (3) and (4) come
// from the model as left by (2). Stages without their components or rows are
// skipped and reported.
template <typename T>
StepReport AddiTrainStep(AddiModel<T>& model, const data::DomainBatch& batch,
                         StageOptimizers<T>& opt, double lr, const AddiOptions& options,
                         Rng& dropout_rng, const StageObserver& observer = {}) {
  StepReport rep;
  Require(batch.size() > 0, ErrorKind::kInvalidInput, "empty batch");
  const Tensor<T> x = batch.features.template Cast<T>();
  const auto& comps = model.components();
  auto& store = model.params();
  auto around = [&](Stage s, bool before) {
    if (observer) observer(s, before);
  };
  auto skip = [&](Stage s, const std::string& why) {
    rep.warnings.push_back(std::string(StageName(s)) + " stage skipped: " + why);
  };

  // (1) autoencoder
  around(Stage::kAutoencoder, true);
  if (comps.generator) {
    store.ZeroGrad();
    Tape<T> tape;
    Var<T> xv = tape.Constant(x);
    Var<T> fake = model.Generate(tape, model.Encode(tape, xv),
                                 tape.Constant(DomainOneHot<T>(batch.domains)));
    Var<T> loss = LossAutoencoder(xv, fake);
    rep.l_ae = detail::CheckedScalar(loss, Stage::kAutoencoder);
    detail::ApplyStage(model, tape, loss, Stage::kAutoencoder, opt, lr);
    rep.updated[0] = true;
  } else {
    skip(Stage::kAutoencoder, "no generator");
  }
  around(Stage::kAutoencoder, false);

  // (2) adversarial generator update
  around(Stage::kAdversarial, true);
  if (comps.generator && (comps.source_disc || comps.target_disc)) {
    store.ZeroGrad();
    Tape<T> tape;
    auto g = LossGenerator(model, tape, x, batch.domains, options);
    if (g.adv) {
      rep.l_g_adv = detail::CheckedScalar(*g.adv, Stage::kAdversarial);
      Var<T> loss = ad::Scale(*g.adv, T(options.lambda));
      detail::ApplyStage(model, tape, loss, Stage::kAdversarial, opt, lr);
      rep.updated[1] = true;
    } else {
      skip(Stage::kAdversarial, "no rows for any present discriminator");
    }
  } else {
    skip(Stage::kAdversarial, "no generator/discriminator pair");
  }
  around(Stage::kAdversarial, false);

  // Fakes for the discriminators, from the updated encoder and generator.
  std::array<std::optional<Tensor<T>>, 2> fakes;
  if (comps.generator && (comps.source_disc || comps.target_disc)) {
    Tape<T> tape(false);
    Var<T> z = model.Encode(tape, tape.Constant(x), false);
    Var<T> own = model.Generate(tape, z, tape.Constant(DomainOneHot<T>(batch.domains)), false);
    for (int d : {0, 1}) {
      if (!model.HasDiscriminator(d)) continue;
      auto f = FakesFor(model, tape, d, z, own, batch.domains, options.routing, false);
      if (f) fakes[static_cast<std::size_t>(d)] = f->value();
    }
  }

  // (3), (4) discriminators
  for (int d : {0, 1}) {
    const Stage s = d == 0 ? Stage::kSourceDisc : Stage::kTargetDisc;
    around(s, true);
    auto rows = RowsOfDomain(batch.domains, d);
    if (!model.HasDiscriminator(d)) {
      skip(s, "component absent");
    } else if (rows.empty() || !fakes[static_cast<std::size_t>(d)]) {
      skip(s, std::string("batch has no ") + (d == 0 ? "source" : "target") + " rows");
    } else {
      store.ZeroGrad();
      Tape<T> tape;
      Var<T> loss = LossDiscriminator(model, tape, d, data::SelectRows<T>(x, rows),
                                      *fakes[static_cast<std::size_t>(d)], options);
      (d == 0 ? rep.l_ds : rep.l_dt) = detail::CheckedScalar(loss, s);
      detail::ApplyStage(model, tape, loss, s, opt, lr);
      rep.updated[static_cast<std::size_t>(s)] = true;
    }
    around(s, false);
  }

  // (5) classifier
  around(Stage::kClassifier, true);
  const auto rows = batch.LabelledRows();
  if (rows.empty()) {
    skip(Stage::kClassifier, "no labelled rows");
  } else {
    store.ZeroGrad();
    std::vector<int> labels;
    for (auto r : rows) {
      labels.push_back(*batch.labels[r]);
      rep.labelled_ids.push_back(batch.ids[r]);
    }
    std::optional<Tensor<T>> lang;
    if (model.config().language_dim > 0) {
      Require(!batch.language_codes.empty(), ErrorKind::kDimension,
              "model expects language codes but the batch has none");
      lang = data::SelectRows<T>(batch.language_codes, rows);
    }
    Tape<T> tape;
    Var<T> loss = LossClassifier(model, tape, data::SelectRows<T>(x, rows), labels,
                                 lang ? &*lang : nullptr, &dropout_rng, true);
    rep.l_c = detail::CheckedScalar(loss, Stage::kClassifier);
    detail::ApplyStage(model, tape, loss, Stage::kClassifier, opt, lr);
    rep.updated[4] = true;
  }
  around(Stage::kClassifier, false);
  return rep;
}

}  // namespace addi::model
