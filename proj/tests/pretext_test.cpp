// tests/pretext_test.cpp

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

#include <cmath>
#include <filesystem>
#include <map>

#include <gtest/gtest.h>

#include "addi/model/addi.hpp"
#include "addi/pretext/pretext.hpp"
#include "gradcheck.hpp"

namespace addi::pretext {
namespace {

using model::ArchitectureConfig;
using testing::RandomTensor;

ArchitectureConfig Tiny() {
  ArchitectureConfig a;
  a.n_mels = 8;
  a.n_frames = 8;
  a.conv_channels = {2, 3};
  a.conv_kernels = {3, 3};
  a.latent = 6;
  a.hidden = {5, 4};
  return a;
}

ErrorKind KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kInvalidInput;
}

std::vector<int> Labels(std::size_t n) {
  std::vector<int> y;
  for (std::size_t i = 0; i < n; ++i) y.push_back(int(i % 4));
  return y;
}

TEST(PretextModel, FiveWayDiscriminator) {
  const auto a = Tiny();
  PretextModel<float> m(a, 1);
  Rng rng(2);
  const auto p = m.DiscriminatorProbs(RandomTensor<float>(a.FeatureShape(3), rng));
  EXPECT_EQ(p.shape(), (ad::Shape{3, 5}));
  EXPECT_EQ(m.fake_class(), 4);
  EXPECT_EQ(m.params().Get("Gp.proj.weight").value.dim(0), a.latent + 4);
}

TEST(PretextModel, UntrainedRealLossNearLnFive) {
  const auto a = Tiny();
  PretextModel<double> m(a, 3);
  // A zero output layer is the exactly uniform discriminator.
  for (auto* p : m.params().All()) {
    if (p->name.rfind("Dp.out", 0) == 0) p->value.Fill(0.0);
  }
  Rng rng(4);
  const auto x = RandomTensor<double>(a.FeatureShape(8), rng);
  ad::Tape<double> t;
  auto [real, fake] = PretextDiscriminatorLoss(m, t, x, Labels(8), x);
  EXPECT_NEAR(real.value()[0], std::log(5.0), 1e-12);
  EXPECT_NEAR(fake.value()[0], std::log(5.0), 1e-12);
  // With the initializer as built, the loss sits near ln 5 too.
  PretextModel<double> fresh(a, 3);
  ad::Tape<double> t2;
  auto [r2, f2] = PretextDiscriminatorLoss(fresh, t2, x, Labels(8), x);
  EXPECT_NEAR(r2.value()[0], std::log(5.0), 0.5);
}

TEST(PretextTrainStep, AlternationIsolation) {
  const auto a = Tiny();
  PretextModel<float> m(a, 5);
  PretextOptimizers<float> opt;
  Rng rng(6);
  const auto x = RandomTensor<float>(a.FeatureShape(4), rng);
  const auto y = Labels(4);
  // Observe each half by replaying the step's two updates separately.
  const auto before = m.params().HashByNamespace();
  {
    auto& store = m.params();
    const auto fake = m.GenerateEval(m.EncodeEval(x), m.OneHot(y));
    store.ZeroGrad();
    ad::Tape<float> t;
    auto [r, f] = PretextDiscriminatorLoss(m, t, x, y, fake);
    t.Backward(ad::Add(r, f));
    ad::AdamStep(store.InNamespaces({kDiscriminatorNs}), opt.discriminator, 1e-3);
  }
  auto mid = m.params().HashByNamespace();
  EXPECT_NE(mid.at("Dp"), before.at("Dp"));
  EXPECT_EQ(mid.at("Gp"), before.at("Gp"));
  EXPECT_EQ(mid.at("E"), before.at("E"));
  {
    auto& store = m.params();
    store.ZeroGrad();
    ad::Tape<float> t;
    t.Backward(PretextGeneratorLoss(m, t, x, y));
    for (const auto* p : store.InNamespaces({kDiscriminatorNs})) {
      for (float g : p->grad.values()) ASSERT_EQ(g, 0.0f) << p->name;
    }
    ad::AdamStep(store.InNamespaces({kEncoderNs, kGeneratorNs}), opt.generator, 1e-3);
  }
  const auto after = m.params().HashByNamespace();
  EXPECT_EQ(after.at("Dp"), mid.at("Dp"));
  EXPECT_NE(after.at("Gp"), mid.at("Gp"));
  EXPECT_NE(after.at("E"), mid.at("E"));

  // The packaged step changes all three, each by its own optimizer.
  PretextModel<float> m2(a, 5);
  PretextOptimizers<float> opt2;
  const auto rep = PretextTrainStep(m2, x, y, opt2, 1e-3);
  EXPECT_EQ(opt2.discriminator.step, 1u);
  EXPECT_EQ(opt2.generator.step, 1u);
  EXPECT_EQ(opt2.reconstruction.step, 0u);
  EXPECT_TRUE(std::isfinite(rep.l_d_real) && std::isfinite(rep.l_g));
  EXPECT_EQ(m2.params().Hash("Dp"), m.params().Hash("Dp"));
}

TEST(PretextTrainStep, MissingPseudoLabels) {
  const auto a = Tiny();
  PretextModel<float> m(a, 7);
  PretextOptimizers<float> opt;
  const Tensor<float> x(a.FeatureShape(2));
  EXPECT_EQ(KindOf([&] { PretextTrainStep(m, x, {}, opt, 1e-3); }), ErrorKind::kInvalidInput);
  EXPECT_EQ(KindOf([&] { PretextTrainStep(m, x, {0}, opt, 1e-3); }), ErrorKind::kInvalidInput);
}

// Pool with class structure: each pseudo class owns a distinct spatial
// pattern, so the conditional game has something to learn.
Tensor<float> StructuredPool(const ArchitectureConfig& a, const std::vector<int>& y, Rng& rng) {
  Tensor<float> x(a.FeatureShape(y.size()));
  const std::size_t plane = a.n_mels * a.n_frames;
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t m = 0; m < a.n_mels; ++m) {
      for (std::size_t t = 0; t < a.n_frames; ++t) {
        const bool on = (m / 4) * 2 + (t / 4) == std::size_t(y[i]);
        x[i * plane + m * a.n_frames + t] = (on ? 2.0f : 0.0f) + 0.1f * float(rng.Normal());
      }
    }
  }
  return x;
}

double FakeProbability(PretextModel<float>& m, const Tensor<float>& x, const std::vector<int>& y) {
  const auto p = m.DiscriminatorProbs(m.GenerateEval(m.EncodeEval(x), m.OneHot(y)));
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += p[i * 5 + 4];
  return s / double(y.size());
}

// Each G half-step, with D_p fixed, lowers the fake-class probability of the
// batch it was applied to. The cold-start trajectory itself rises on a tiny
// pool because D_p wins the game, so the check is on the G move.
TEST(PretextTrainStep, GeneratorStepAvoidsFakeClass) {
  const auto a = Tiny();
  PretextModel<float> m(a, 8);
  PretextOptimizers<float> opt;
  Rng rng(9);
  const auto y = Labels(16);
  const auto x = StructuredPool(a, y, rng);
  int lowered = 0;
  double drop = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double before = PretextTrainStep(m, x, y, opt, 2e-3).fake_prob;
    const double after = FakeProbability(m, x, y);
    lowered += after < before;
    drop += before - after;
  }
  EXPECT_GT(lowered, 100);
  EXPECT_GT(drop, 0.0);
}

TEST(ReconstructionStep, LossFalls) {
  const auto a = Tiny();
  PretextModel<float> m(a, 11);
  PretextOptimizers<float> opt;
  Rng rng(12);
  const auto x = StructuredPool(a, Labels(8), rng);
  const auto dp = m.params().Hash("Dp");
  const double first = ReconstructionStep(m, x, opt, 1e-3);
  double last = first;
  for (int i = 0; i < 50; ++i) last = ReconstructionStep(m, x, opt, 1e-3);
  EXPECT_LT(last, first);
  EXPECT_EQ(m.params().Hash("Dp"), dp);
  EXPECT_EQ(opt.discriminator.step, 0u);
}

// --- synthesis ----------------------------------------------------------------

TEST(GenerateSynthetic, UniformBalanceExact) {
  PretextModel<float> m(Tiny(), 13);
  const auto s = GenerateSynthetic(m, 40, {}, 14);
  std::map<int, int> counts;
  for (const auto& x : s) {
    ++counts[x.label];
    EXPECT_EQ(x.features.n_mels, 8u);
    EXPECT_EQ(x.features.n_frames, 8u);
    EXPECT_EQ(x.features.values.size(), 64u);
    for (float v : x.features.values) EXPECT_TRUE(std::isfinite(v));
  }
  for (int c = 0; c < 4; ++c) EXPECT_EQ(counts[c], 10);
}

TEST(GenerateSynthetic, WeightedBalanceAndDeterminism) {
  PretextModel<float> m(Tiny(), 15);
  const auto s = GenerateSynthetic(m, 10, {1, 1, 2, 0}, 16, 3);
  std::map<int, int> counts;
  for (const auto& x : s) ++counts[x.label];
  EXPECT_EQ(counts[0] + counts[1], 5);
  EXPECT_EQ(counts[2], 5);
  EXPECT_EQ(counts[3], 0);
  const auto again = GenerateSynthetic(m, 10, {1, 1, 2, 0}, 16, 3);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(s[i].features, again[i].features);
    EXPECT_EQ(s[i].label, again[i].label);
    EXPECT_EQ(s[i].provenance, again[i].provenance);
  }
}

TEST(GenerateSynthetic, NonPositiveCount) {
  PretextModel<float> m(Tiny(), 17);
  EXPECT_EQ(KindOf([&] { GenerateSynthetic(m, 0, {}, 1); }), ErrorKind::kInvalidInput);
  EXPECT_EQ(KindOf([&] { GenerateSynthetic(m, -3, {}, 1); }), ErrorKind::kInvalidInput);
}

TEST(GenerateSynthetic, WrittenSetReloads) {
  PretextModel<float> m(Tiny(), 18);
  const auto s = GenerateSynthetic(m, 6, {}, 19);
  const auto dir = std::filesystem::temp_directory_path() / "addi_synthetic_set";
  std::filesystem::remove_all(dir);
  const auto recs = WriteSyntheticSet(dir.string(), s);
  const auto corpus = data::LoadManifest((dir / "manifest.tsv").string());
  ASSERT_EQ(corpus.records, recs);
  const auto utts = data::LoadFeatures(corpus.records, dir.string());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(*utts[i].features, s[i].features);
    EXPECT_EQ(utts[i].record.label->value, s[i].label);
    EXPECT_EQ(utts[i].record.domain, 0);
  }
}

// --- encoder interchange ---------------------------------------------------------

TEST(ExportEncoder, RoundTripBitIdentical) {
  const auto a = Tiny();
  for (bool trained : {false, true}) {
    PretextModel<float> p(a, 20);
    if (trained) {
      PretextOptimizers<float> opt;
      Rng rng(21);
      const auto x = RandomTensor<float>(a.FeatureShape(4), rng);
      for (int i = 0; i < 3; ++i) PretextTrainStep(p, x, Labels(4), opt, 1e-2);
    }
    const auto ckpt = ExportEncoder(p);
    for (const auto& [name, e] : ckpt.params) EXPECT_EQ(name.rfind("E.", 0), 0u) << name;
    model::AddiModel<float> addi(a, {}, 99);
    ImportEncoder(ckpt, addi);
    Rng rng(22);
    const auto x = RandomTensor<float>(a.FeatureShape(3), rng);
    EXPECT_EQ(addi.EncodeEval(x), p.EncodeEval(x));
    // Shapes agree with a fresh model parameter for parameter.
    model::AddiModel<float> fresh(a, {}, 5);
    for (const auto* q : fresh.params().All())
      EXPECT_EQ(addi.params().Get(q->name).value.shape(), q->value.shape());
  }
}

TEST(ExportEncoder, MismatchedConfigListsParameters) {
  auto a = Tiny();
  PretextModel<float> p(a, 23);
  a.conv_channels = {2, 4};
  model::AddiModel<float> other(a, {}, 24);
  try {
    ImportEncoder(ExportEncoder(p), other);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCompatibility);
    EXPECT_NE(std::string(e.what()).find("E.conv2.weight"), std::string::npos) << e.what();
  }
}

// --- augmentation -----------------------------------------------------------------

TEST(AugmentDataset, Modes) {
  PretextModel<float> m(Tiny(), 25);
  const auto syn = SyntheticUtterances(GenerateSynthetic(m, 4, {}, 26));
  const auto real = SyntheticUtterances(GenerateSynthetic(m, 6, {}, 27), "real");
  EXPECT_EQ(AugmentDataset(real, syn, AugmentMode::kReal).size(), 6u);
  EXPECT_EQ(AugmentDataset(real, {}, AugmentMode::kReal)[0].record.id, "real-0");
  EXPECT_EQ(AugmentDataset(real, syn, AugmentMode::kRealPlusSynthetic).size(), 10u);
  const auto only = AugmentDataset(real, syn, AugmentMode::kSynthetic);
  ASSERT_EQ(only.size(), 4u);
  for (const auto& u : only) {
    EXPECT_EQ(u.record.corpus_id, "synthetic");
    EXPECT_EQ(u.record.domain, 0);
  }
  EXPECT_EQ(KindOf([&] { AugmentDataset(real, {}, AugmentMode::kSynthetic); }),
            ErrorKind::kInvalidInput);
  EXPECT_EQ(KindOf([] { ParseAugmentMode("both"); }), ErrorKind::kConfig);
}

}  // namespace
}  // namespace addi::pretext
