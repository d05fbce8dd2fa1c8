// addi/eval/toy.hpp

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

// Synthetic two-domain corpus for desk-scale checks. Each of the four classes
// owns a fixed random n_mels x T pattern: white noise blurred by a Gaussian of
// width `smooth` bins along both axes and rescaled to unit variance. A source
// item is
//
//   x = signal * P_c + noise * N
//
// with N a fresh pattern blurred the same way. A target item additionally
// carries a fixed per-channel offset shift * o_m, shared by every target item,
// plus extra blurred noise of scale target_noise. The unlabelled pool draws
// half its items from each domain and keeps no labels.

#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "addi/common/rng.hpp"
#include "addi/data/manifest.hpp"

namespace addi::eval {

struct ToyOptions {
  std::size_t n_source = 2000;
  std::size_t n_target = 2000;
  std::size_t n_unlabelled = 1000;
  std::size_t n_mels = 40;
  std::size_t n_frames = 8;
  int n_classes = 4;
  double smooth = 2.0;
  double signal = 0.5;
  double noise = 1.0;
  double shift = 2.0;
  double target_noise = 0.5;
  std::uint64_t seed = 7;
};

struct ToyCorpus {
  std::vector<data::Utterance> source, target, unlabelled;
  std::vector<std::vector<float>> patterns;  // per class, n_mels * n_frames
  std::vector<float> offset;                 // per channel, already scaled by shift
};

namespace detail {

// Separable Gaussian blur with zero padding, rescaled to zero mean and unit
// variance. Width 0 leaves the pattern white.
inline std::vector<float> Blur(const std::vector<float>& x, std::size_t rows, std::size_t cols,
                               double width) {
  std::vector<double> y(x.begin(), x.end());
  if (width > 0.0) {
    const int r = static_cast<int>(std::ceil(3.0 * width));
    std::vector<double> k(2 * r + 1);
    for (int i = -r; i <= r; ++i) k[i + r] = std::exp(-0.5 * i * i / (width * width));
    auto pass = [&](std::size_t n_lines, std::size_t len, auto at) {
      std::vector<double> line(len);
      for (std::size_t a = 0; a < n_lines; ++a) {
        for (std::size_t b = 0; b < len; ++b) {
          double s = 0.0;
          for (int i = -r; i <= r; ++i) {
            const long j = static_cast<long>(b) + i;
            if (j >= 0 && j < static_cast<long>(len)) s += k[i + r] * at(a, j);
          }
          line[b] = s;
        }
        for (std::size_t b = 0; b < len; ++b) at(a, b) = line[b];
      }
    };
    pass(rows, cols, [&](std::size_t m, std::size_t t) -> double& { return y[m * cols + t]; });
    pass(cols, rows, [&](std::size_t t, std::size_t m) -> double& { return y[m * cols + t]; });
  }
  double mean = 0.0, var = 0.0;
  for (double v : y) mean += v;
  mean /= double(y.size());
  for (double v : y) var += (v - mean) * (v - mean);
  const double scale = var > 0.0 ? 1.0 / std::sqrt(var / double(y.size())) : 0.0;
  std::vector<float> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = static_cast<float>((y[i] - mean) * scale);
  return out;
}

}  // namespace detail

inline ToyCorpus MakeToyCorpus(const ToyOptions& o) {
  Require(o.n_classes >= 2 && o.n_mels > 0 && o.n_frames > 0, ErrorKind::kConfig,
          "toy corpus needs at least two classes and a non-empty feature shape");
  ToyCorpus c;
  const std::size_t plane = o.n_mels * o.n_frames;
  Rng pattern_rng(DeriveSeed(o.seed, "toy.patterns"));
  c.patterns.assign(static_cast<std::size_t>(o.n_classes), std::vector<float>(plane));
  for (auto& p : c.patterns) {
    for (auto& v : p) v = static_cast<float>(pattern_rng.Normal());
    p = detail::Blur(p, o.n_mels, o.n_frames, o.smooth);
  }
  Rng offset_rng(DeriveSeed(o.seed, "toy.offset"));
  c.offset.resize(o.n_mels);
  for (auto& v : c.offset) v = static_cast<float>(o.shift * offset_rng.Normal());

  auto make = [&](std::size_t n, int domain, const std::string& prefix, bool labelled,
                  std::uint64_t stream) {
    Rng rng(DeriveSeed(o.seed, prefix, stream));
    std::vector<data::Utterance> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int cls = static_cast<int>(i % static_cast<std::size_t>(o.n_classes));
      auto f = std::make_shared<signal::FeatureMatrix>();
      f->n_mels = o.n_mels;
      f->n_frames = o.n_frames;
      f->n_frames_valid = o.n_frames;
      f->values.resize(plane);
      const auto& p = c.patterns[static_cast<std::size_t>(cls)];
      auto draw = [&] {
        std::vector<float> n(plane);
        for (auto& v : n) v = static_cast<float>(rng.Normal());
        return detail::Blur(n, o.n_mels, o.n_frames, o.smooth);
      };
      const auto noise = draw();
      const auto extra = domain == 1 ? draw() : std::vector<float>(plane, 0.0f);
      for (std::size_t m = 0; m < o.n_mels; ++m) {
        for (std::size_t t = 0; t < o.n_frames; ++t) {
          const std::size_t k = m * o.n_frames + t;
          double v = o.signal * p[k] + o.noise * noise[k];
          if (domain == 1) v += c.offset[m] + o.target_noise * extra[k];
          f->values[k] = static_cast<float>(v);
        }
      }
      data::UtteranceRecord r;
      r.id = prefix + "-" + std::to_string(i);
      r.corpus_id = prefix;
      r.domain = domain;
      if (labelled) r.label = data::Label{data::LabelKind::kCategorical4, cls};
      out.push_back({r, f});
    }
    return out;
  };
  c.source = make(o.n_source, 0, "toy-src", true, 0);
  c.target = make(o.n_target, 1, "toy-tgt", true, 0);
  auto pool_s = make(o.n_unlabelled / 2, 0, "toy-pool-src", false, 1);
  auto pool_t = make(o.n_unlabelled - o.n_unlabelled / 2, 1, "toy-pool-tgt", false, 1);
  c.unlabelled = std::move(pool_s);
  c.unlabelled.insert(c.unlabelled.end(), pool_t.begin(), pool_t.end());
  return c;
}

}  // namespace addi::eval
