// addi/model/layers.hpp

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

// Building blocks shared by the adaptation and pretext networks: the conv
// encoder trunk, the transposed-conv generator, and dense stacks. Parameters
// live in a ParameterStore under "<namespace>.<layer>.<weight|bias>".

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "addi/autodiff/ops.hpp"
#include "addi/autodiff/parameters.hpp"
#include "addi/common/rng.hpp"

namespace addi::model {

using ad::ParameterStore;
using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

struct ArchitectureConfig {
  std::size_t n_mels = 40;
  std::size_t n_frames = 100;
  std::vector<std::size_t> conv_channels{16, 32, 64};
  std::vector<std::size_t> conv_kernels{5, 3, 3};
  std::size_t pool = 2;
  std::size_t latent = 256;
  std::vector<std::size_t> hidden{256, 128};  // discriminator and classifier widths
  double dropout = 0.3;
  std::size_t n_classes = 4;
  std::size_t language_dim = 0;  // one-hot language width appended to the classifier input

  // Spatial size after each conv + pool block; entry 0 is the input.
  std::vector<std::pair<std::size_t, std::size_t>> EncoderSizes() const {
    std::vector<std::pair<std::size_t, std::size_t>> sizes{{n_mels, n_frames}};
    for (std::size_t i = 0; i < conv_channels.size(); ++i) {
      auto [h, w] = sizes.back();
      const std::size_t k = conv_kernels[i], pad = k / 2;
      h = h + 2 * pad - k + 1;
      w = w + 2 * pad - k + 1;
      Require(h >= pool && w >= pool, ErrorKind::kConfig,
              "encoder block " + std::to_string(i + 1) + " sees a " + std::to_string(h) + "x" +
                  std::to_string(w) + " map, smaller than the pooling window; use more frames "
                  "or fewer blocks");
      sizes.emplace_back((h - pool) / pool + 1, (w - pool) / pool + 1);
    }
    return sizes;
  }

  // Shape C x H x W of the last encoder block, before flattening.
  Shape TrunkShape() const {
    auto s = EncoderSizes().back();
    return {conv_channels.back(), s.first, s.second};
  }

  std::size_t TrunkSize() const { return ad::NumElements(TrunkShape()); }

  void Validate() const {
    Require(n_mels > 0 && n_frames > 0, ErrorKind::kConfig, "feature shape must be positive");
    Require(!conv_channels.empty(), ErrorKind::kConfig, "encoder needs at least one conv block");
    Require(conv_channels.size() == conv_kernels.size(), ErrorKind::kConfig,
            "conv_channels and conv_kernels differ in length");
    for (auto c : conv_channels) Require(c > 0, ErrorKind::kConfig, "conv channel count is 0");
    for (auto k : conv_kernels) Require(k > 0, ErrorKind::kConfig, "conv kernel size is 0");
    Require(pool >= 1, ErrorKind::kConfig, "pool must be at least 1");
    Require(latent > 0, ErrorKind::kConfig, "latent size must be positive");
    Require(hidden.size() == 2 && hidden[0] > 0 && hidden[1] > 0, ErrorKind::kConfig,
            "hidden must list two positive widths");
    Require(dropout >= 0.0 && dropout < 1.0, ErrorKind::kConfig, "dropout must lie in [0, 1)");
    Require(n_classes >= 2, ErrorKind::kConfig, "need at least two classes");
    EncoderSizes();
  }

  Shape FeatureShape(std::size_t batch) const { return {batch, 1, n_mels, n_frames}; }

  friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

namespace detail {

// Uniform(-a, a) with a = sqrt(gain / fan_in): gain 6 (He) ahead of a ReLU,
// gain 3 (LeCun) for linear or sigmoid outputs.
template <typename T>
Tensor<T> UniformInit(Shape shape, double fan_in, double gain, Rng& rng) {
  Tensor<T> t(std::move(shape));
  const double a = std::sqrt(gain / std::max(fan_in, 1.0));
  for (auto& v : t.storage()) v = static_cast<T>(rng.Uniform(-a, a));
  return t;
}

inline constexpr double kHeGain = 6.0;
inline constexpr double kLeCunGain = 3.0;

}  // namespace detail

// Parameter handle on a tape: a leaf when trainable, a constant otherwise, so
// frozen parts of a graph cost no gradient work.
template <typename T>
Var<T> Bind(Tape<T>& tape, ParameterStore<T>& store, const std::string& name, bool trainable) {
  auto& p = store.Get(name);
  return trainable ? tape.Leaf(p) : tape.Constant(p.value);
}

// --- encoder trunk -------------------------------------------------------

template <typename T>
void AddConvTrunk(ParameterStore<T>& store, const ArchitectureConfig& cfg, const std::string& ns,
                  Rng& rng) {
  std::size_t in = 1;
  for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
    const std::size_t f = cfg.conv_channels[i], k = cfg.conv_kernels[i];
    const std::string layer = ns + ".conv" + std::to_string(i + 1);
    store.Add(layer + ".weight",
              detail::UniformInit<T>({f, in, k, k}, double(in * k * k), detail::kHeGain, rng));
    store.Add(layer + ".bias", Tensor<T>({f}));
    in = f;
  }
}

// x: N x 1 x n_mels x n_frames  ->  N x TrunkSize()
template <typename T>
Var<T> RunConvTrunk(Tape<T>& tape, ParameterStore<T>& store, const ArchitectureConfig& cfg,
                    const std::string& ns, const Var<T>& x, bool trainable) {
  Require(x.shape().size() == 4 && x.dim(1) == 1 && x.dim(2) == cfg.n_mels &&
              x.dim(3) == cfg.n_frames,
          ErrorKind::kDimension,
          "encoder expects N x " + ad::ShapeString({1, cfg.n_mels, cfg.n_frames}) + " input, got " +
              ad::ShapeString(x.shape()));
  Var<T> h = x;
  for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
    const std::string layer = ns + ".conv" + std::to_string(i + 1);
    auto w = Bind(tape, store, layer + ".weight", trainable);
    auto b = Bind(tape, store, layer + ".bias", trainable);
    h = ad::Conv2d(h, w, &b, 1, cfg.conv_kernels[i] / 2);
    h = ad::Relu(h);
    h = ad::MaxPool2d(h, cfg.pool, cfg.pool);
  }
  return ad::Flatten(h);
}

// --- dense stacks ----------------------------------------------------------

template <typename T>
void AddDense(ParameterStore<T>& store, const std::string& layer, std::size_t in, std::size_t out,
              double gain, Rng& rng) {
  store.Add(layer + ".weight", detail::UniformInit<T>({in, out}, double(in), gain, rng));
  store.Add(layer + ".bias", Tensor<T>({out}));
}

template <typename T>
Var<T> RunDense(Tape<T>& tape, ParameterStore<T>& store, const std::string& layer,
                const Var<T>& x, bool trainable) {
  auto w = Bind(tape, store, layer + ".weight", trainable);
  auto b = Bind(tape, store, layer + ".bias", trainable);
  return ad::Dense(x, w, b);
}

// fc1 (ReLU) -> fc2 (ReLU) -> out, with optional dropout after fc1.
template <typename T>
void AddMlp(ParameterStore<T>& store, const std::string& ns, std::size_t in,
            const std::vector<std::size_t>& hidden, std::size_t out, Rng& rng) {
  AddDense(store, ns + ".fc1", in, hidden[0], detail::kHeGain, rng);
  AddDense(store, ns + ".fc2", hidden[0], hidden[1], detail::kHeGain, rng);
  AddDense(store, ns + ".out", hidden[1], out, detail::kLeCunGain, rng);
}

template <typename T>
Var<T> RunMlp(Tape<T>& tape, ParameterStore<T>& store, const std::string& ns, const Var<T>& x,
              bool trainable, double dropout = 0.0, Rng* rng = nullptr, bool training = false) {
  Var<T> h = ad::Relu(RunDense(tape, store, ns + ".fc1", x, trainable));
  if (dropout > 0.0 && training) h = ad::Dropout(h, dropout, *rng, true);
  h = ad::Relu(RunDense(tape, store, ns + ".fc2", h, trainable));
  return RunDense(tape, store, ns + ".out", h, trainable);
}

// --- generator ---------------------------------------------------------------

// Dense projection of [z | code] to the trunk shape, then one stride-2
// transposed conv (kernel 4, pad 1) per encoder block, mirroring the encoder
// channels back to a single plane. Each upsampling doubles the map; the result
// is cropped or zero-padded to n_mels x n_frames.
inline constexpr std::size_t kDeconvKernel = 4;
inline constexpr std::size_t kDeconvStride = 2;
inline constexpr std::size_t kDeconvPad = 1;

template <typename T>
void AddGenerator(ParameterStore<T>& store, const ArchitectureConfig& cfg, const std::string& ns,
                  std::size_t code_dim, Rng& rng) {
  AddDense(store, ns + ".proj", cfg.latent + code_dim, cfg.TrunkSize(), detail::kHeGain, rng);
  const std::size_t blocks = cfg.conv_channels.size();
  const std::size_t k = kDeconvKernel;
  for (std::size_t i = 0; i < blocks; ++i) {
    const std::size_t in = cfg.conv_channels[blocks - 1 - i];
    const std::size_t out = i + 1 < blocks ? cfg.conv_channels[blocks - 2 - i] : 1;
    const double fan_in = double(in * k * k) / double(kDeconvStride * kDeconvStride);
    const double gain = i + 1 < blocks ? detail::kHeGain : detail::kLeCunGain;
    const std::string layer = ns + ".deconv" + std::to_string(i + 1);
    store.Add(layer + ".weight", detail::UniformInit<T>({in, out, k, k}, fan_in, gain, rng));
    store.Add(layer + ".bias", Tensor<T>({out}));
  }
}

// z: N x latent, code: N x code_dim  ->  N x 1 x n_mels x n_frames
template <typename T>
Var<T> RunGenerator(Tape<T>& tape, ParameterStore<T>& store, const ArchitectureConfig& cfg,
                    const std::string& ns, const Var<T>& z, const Var<T>& code, bool trainable) {
  Require(z.shape().size() == 2 && z.dim(1) == cfg.latent, ErrorKind::kDimension,
          "generator expects N x " + std::to_string(cfg.latent) + " latent codes, got " +
              ad::ShapeString(z.shape()));
  Require(code.shape().size() == 2 && code.dim(0) == z.dim(0), ErrorKind::kDimension,
          "generator condition must have one row per latent code");
  Var<T> h = ad::Relu(RunDense(tape, store, ns + ".proj", ad::ConcatColumns(z, code), trainable));
  Shape trunk = cfg.TrunkShape();
  h = ad::Reshape(h, {z.dim(0), trunk[0], trunk[1], trunk[2]});
  const std::size_t blocks = cfg.conv_channels.size();
  for (std::size_t i = 0; i < blocks; ++i) {
    const std::string layer = ns + ".deconv" + std::to_string(i + 1);
    auto w = Bind(tape, store, layer + ".weight", trainable);
    auto b = Bind(tape, store, layer + ".bias", trainable);
    h = ad::TransposedConv2d(h, w, &b, kDeconvStride, kDeconvPad);
    if (i + 1 < blocks) h = ad::Relu(h);
  }
  return ad::FitSpatial(h, cfg.n_mels, cfg.n_frames);
}

}  // namespace addi::model
