// tests/signal_test.cpp

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
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "addi/common/rng.hpp"
#include "addi/signal/extract.hpp"
#include "addi/signal/feature_cache.hpp"
#include "addi/signal/features.hpp"
#include "addi/signal/wav.hpp"

namespace addi::signal {
namespace {

namespace fs = std::filesystem;

AudioClip Tone(std::size_t n, double hz, double amp = 0.5, int sr = 16000) {
  AudioClip c;
  c.sample_rate = sr;
  c.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) c.samples[i] = amp * std::sin(2.0 * M_PI * hz * double(i) / sr);
  return c;
}

AudioClip Noise(std::size_t n, std::uint64_t seed, double amp = 0.3) {
  AudioClip c;
  Rng rng(seed);
  c.samples.resize(n);
  for (auto& s : c.samples) s = amp * rng.Uniform(-1.0, 1.0);
  return c;
}

fs::path TempDir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("addi_signal_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

TEST(Preemphasize, ZeroCoefficientIsIdentity) {
  const std::vector<double> x{0.1, -0.4, 0.9};
  EXPECT_EQ(Preemphasize(x, 0.0), x);
}

TEST(Preemphasize, ConstantSignal) {
  const auto y = Preemphasize(std::vector<double>{1, 1, 1}, 0.97);
  for (double v : y) EXPECT_NEAR(v, 0.03, 1e-12);
}

TEST(Preemphasize, Impulse) {
  const auto y = Preemphasize(std::vector<double>{1, 0}, 0.97);
  EXPECT_NEAR(y[0], 0.03, 1e-12);
  EXPECT_NEAR(y[1], -0.97, 1e-12);
}

TEST(Preemphasize, Errors) {
  try {
    Preemphasize(std::vector<double>{}, 0.97);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidInput);
  }
  EXPECT_THROW(Preemphasize(std::vector<double>{1.0}, 1.0), Error);
}

TEST(PoveyWindow, EndpointMidpointSymmetry) {
  const auto w = PoveyWindow(401);
  EXPECT_EQ(w[0], 0.0);
  EXPECT_NEAR(w[200], 1.0, 1e-15);
  for (std::size_t n = 0; n < w.size(); ++n) EXPECT_NEAR(w[n], w[w.size() - 1 - n], 1e-12);
  const auto w2 = PoveyWindow(400);
  for (std::size_t n = 0; n < w2.size(); ++n) EXPECT_NEAR(w2[n], w2[w2.size() - 1 - n], 1e-12);
}

TEST(FrameSignal, OneFrameAtExactLength) {
  const auto c = Tone(400, 440.0);
  EXPECT_EQ(FrameSignal(c.samples, 16000).rows.size(), 1u);
}

TEST(FrameSignal, CountLawOnRandomLengths) {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 400 + rng.Below(5000);
    const auto c = Noise(n, 100 + i);
    const auto f = FrameSignal(c.samples, 16000);
    EXPECT_EQ(f.rows.size(), 1 + (n - 400) / 160) << n;
    EXPECT_EQ(f.frame_length, 400u);
  }
}

TEST(FrameSignal, ShortSignalFails) {
  const auto c = Tone(399, 440.0);
  try {
    FrameSignal(c.samples, 16000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidInput);
  }
}

TEST(MelScale, Values) {
  EXPECT_NEAR(MelScale(700.0), 1127.0 * std::log(2.0), 1e-9);
  EXPECT_NEAR(MelScale(700.0), 781.17, 0.01);
  EXPECT_EQ(MelScale(0.0), 0.0);
}

TEST(MelFilterbank, SilenceHitsFloor) {
  AudioClip c;
  c.samples.assign(1600, 0.0);
  const auto f = ComputeFbank(c);
  EXPECT_EQ(f.n_mels, 40u);
  EXPECT_EQ(f.n_frames, 8u);
  const float floor = static_cast<float>(std::log(1e-10));
  for (float v : f.values) EXPECT_EQ(v, floor);
}

TEST(MelFilterbank, ToneEnergyPeaksNearItsBand) {
  const auto f = ComputeFbank(Tone(4000, 1000.0));
  // The mel band whose centre is closest to 1 kHz dominates.
  const double lo = MelScale(20.0), hi = MelScale(8000.0), delta = (hi - lo) / 41.0;
  std::size_t expect = 0;
  double best = 1e9;
  for (std::size_t b = 0; b < 40; ++b) {
    const double d = std::abs(lo + (b + 1) * delta - MelScale(1000.0));
    if (d < best) best = d, expect = b;
  }
  std::size_t argmax = 0;
  for (std::size_t b = 1; b < 40; ++b)
    if (f.at(b, 5) > f.at(argmax, 5)) argmax = b;
  EXPECT_LE(std::abs(int(argmax) - int(expect)), 1);
}

TEST(MelFilterbank, ScalingNeverDecreasesEnergy) {
  const auto c = Noise(3200, 7);
  auto loud = c;
  for (auto& s : loud.samples) s *= 1.7;
  const auto a = ComputeFbank(c), b = ComputeFbank(loud);
  for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_GE(b.values[i], a.values[i]);
}

TEST(MelFilterbank, Deterministic) {
  const auto c = Noise(5000, 8);
  EXPECT_EQ(ComputeFbank(c), ComputeFbank(c));
}

TEST(MelFilterbank, SampleRateTooLowForCutoff) {
  auto c = Noise(800, 9);
  c.sample_rate = 8000;
  FbankOptions o;
  o.mel.high_cutoff_hz = 7600.0;
  EXPECT_THROW(ComputeFbank(c, o), Error);
}

FeatureMatrix Ramp(std::size_t frames) {
  FeatureMatrix f;
  f.n_mels = 40;
  f.n_frames = f.n_frames_valid = frames;
  for (std::size_t i = 0; i < 40 * frames; ++i) f.values.push_back(1.0f + float(i));
  return f;
}

TEST(PadToLongest, SingleUnchanged) {
  const auto f = Ramp(4);
  EXPECT_EQ(PadToLongest({f})[0], f);
}

TEST(PadToLongest, ThreeAndFive) {
  const auto a = Ramp(3), b = Ramp(5);
  const auto out = PadToLongest({a, b});
  EXPECT_EQ(out[0].n_frames, 5u);
  EXPECT_EQ(out[1].n_frames, 5u);
  EXPECT_EQ(out[0].n_frames_valid, 3u);
  EXPECT_EQ(out[1], b);
  for (std::size_t m = 0; m < 40; ++m) {
    for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(out[0].at(m, t), a.at(m, t));
    EXPECT_EQ(out[0].at(m, 3), 0.0f);
    EXPECT_EQ(out[0].at(m, 4), 0.0f);
  }
  EXPECT_EQ(PadToLongest(out), out);
}

TEST(PadToLongest, EmptySetFails) { EXPECT_THROW(PadToLongest({}), Error); }

TEST(PadTo, TooShortTargetFails) {
  try {
    PadTo(Ramp(6), 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
  }
}

TEST(Wav, RoundTripWithin16BitQuantisation) {
  const auto dir = TempDir("wav");
  const auto c = Tone(1000, 300.0, 0.8);
  WriteWav((dir / "a.wav").string(), c);
  const auto back = ReadWav((dir / "a.wav").string());
  ASSERT_EQ(back.samples.size(), c.samples.size());
  EXPECT_EQ(back.sample_rate, 16000);
  for (std::size_t i = 0; i < c.samples.size(); ++i) EXPECT_NEAR(back.samples[i], c.samples[i], 0.5 / 32768);
}

TEST(Wav, GarbageIsDataError) {
  const auto dir = TempDir("wavbad");
  std::ofstream((dir / "x.wav").string()) << "definitely not audio";
  try {
    ReadWav((dir / "x.wav").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
  }
}

TEST(FeatureCache, RoundTripBitExact) {
  const auto dir = TempDir("cache");
  const auto f = PadTo(ComputeFbank(Noise(2400, 3)), 20);
  WriteFeatureCache((dir / "f.fb").string(), f);
  EXPECT_EQ(ReadFeatureCache((dir / "f.fb").string()), f);
  std::ifstream is((dir / "f.fb").string(), std::ios::binary);
  char magic[4];
  is.read(magic, 4);
  EXPECT_EQ(std::string(magic, 4), "ADFB");
}

TEST(FeatureCache, TruncatedFileFails) {
  const auto dir = TempDir("cachebad");
  WriteFeatureCache((dir / "f.fb").string(), ComputeFbank(Noise(1600, 4)));
  fs::resize_file(dir / "f.fb", 30);
  EXPECT_THROW(ReadFeatureCache((dir / "f.fb").string()), Error);
}

TEST(ExtractManifest, SecondRunReusesCacheAndIsByteIdentical) {
  const auto dir = TempDir("extract");
  WriteWav((dir / "u1.wav").string(), Tone(3200, 200.0));
  WriteWav((dir / "u2.wav").string(), Noise(4000, 5));
  {
    std::ofstream m((dir / "audio.tsv").string());
    m << "u1\tu1.wav\tcorpA\t0\tcategorical\tangry\tlangA\n"
      << "u2\tu2.wav\tcorpA\t0\tcategorical\tsad\tlangA\n";
  }
  const auto cache = (dir / "cache").string();
  const auto out = (dir / "features.tsv").string();
  std::vector<std::string> log;
  const auto first = ExtractManifest((dir / "audio.tsv").string(), cache, out, {},
                                     [&](const std::string& s) { log.push_back(s); });
  EXPECT_EQ(first.computed, 2u);
  EXPECT_EQ(first.reused, 0u);
  EXPECT_TRUE(log.empty());
  std::stringstream before;
  before << std::ifstream(out).rdbuf();
  std::map<std::string, fs::file_time_type> stamps;
  for (const auto& e : fs::directory_iterator(cache)) stamps[e.path().string()] = e.last_write_time();

  const auto second = ExtractManifest((dir / "audio.tsv").string(), cache, out, {},
                                      [&](const std::string& s) { log.push_back(s); });
  EXPECT_EQ(second.computed, 0u);
  EXPECT_EQ(second.reused, 2u);
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log[0].rfind("skip u1: cached at ", 0), 0u) << log[0];
  std::stringstream after;
  after << std::ifstream(out).rdbuf();
  EXPECT_EQ(before.str(), after.str());
  for (const auto& e : fs::directory_iterator(cache)) {
    EXPECT_EQ(stamps.at(e.path().string()), e.last_write_time());
  }
  const auto f = ReadFeatureCache(second.records[0].feature_path);
  EXPECT_EQ(f, ComputeFbank(ReadWav((dir / "u1.wav").string())));
}

}  // namespace
}  // namespace addi::signal
