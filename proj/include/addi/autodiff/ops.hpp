// addi/autodiff/ops.hpp

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

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "addi/autodiff/tape.hpp"
#include "addi/common/rng.hpp"

namespace addi::ad {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
MatMap<T> AsMat(T* p, std::size_t rows, std::size_t cols) {
  return MatMap<T>(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
template <typename T>
ConstMatMap<T> AsMat(const T* p, std::size_t rows, std::size_t cols) {
  return ConstMatMap<T>(p, static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
}

// Sliding-window geometry over one C x H x W image.
struct Window2d {
  std::size_t channels, height, width;
  std::size_t kh, kw, stride, pad;
  std::size_t out_h, out_w;

  std::size_t patch() const { return channels * kh * kw; }
  std::size_t positions() const { return out_h * out_w; }
};

inline void RequireRank(const Shape& s, std::size_t rank, const char* op,
                        const char* what) {
  Require(s.size() == rank, ErrorKind::kDimension,
          std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
              ", got " + ShapeString(s));
}

inline Window2d MakeWindow(const char* op, std::size_t channels, std::size_t h,
                           std::size_t w, std::size_t kh, std::size_t kw,
                           std::size_t stride, std::size_t pad) {
  Require(stride >= 1, ErrorKind::kInvalidInput, std::string(op) + ": stride must be >= 1");
  Require(kh <= h + 2 * pad, ErrorKind::kDimension,
          std::string(op) + ": kernel height " + std::to_string(kh) +
              " exceeds padded input height " + std::to_string(h + 2 * pad) +
              " (axis 2)");
  Require(kw <= w + 2 * pad, ErrorKind::kDimension,
          std::string(op) + ": kernel width " + std::to_string(kw) +
              " exceeds padded input width " + std::to_string(w + 2 * pad) +
              " (axis 3)");
  return Window2d{channels, h, w, kh, kw, stride, pad,
                  (h + 2 * pad - kh) / stride + 1, (w + 2 * pad - kw) / stride + 1};
}

// img: C x H x W  ->  cols: (C*kh*kw) x (out_h*out_w)
template <typename T>
void Im2Col(const T* img, const Window2d& g, T* cols) {
  const std::size_t npos = g.positions();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* row = cols + ((c * g.kh + ki) * g.kw + kj) * npos;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          T* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = img + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width))
                          ? T(0)
                          : src[ix];
          }
        }
      }
    }
  }
}

// Adjoint of Im2Col: scatter-adds cols back into img.
template <typename T>
void Col2Im(const T* cols, const Window2d& g, T* img) {
  const std::size_t npos = g.positions();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* row = cols + ((c * g.kh + ki) * g.kw + kj) * npos;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          T* dst = img + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          const T* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
T ClampProb(T p, T eps) {
  return std::min(std::max(p, eps), T(1) - eps);
}

}  // namespace detail

// Cross-correlation. input N x C x H x W, kernels F x C x kh x kw, bias F or
// absent. Output N x F x H' x W' with H' = floor((H + 2 pad - kh)/stride) + 1.
template <typename T>
Var<T> Conv2d(const Var<T>& input, const Var<T>& kernels, const Var<T>* bias,
              std::size_t stride, std::size_t pad) {
  using namespace detail;
  const Shape& xs = input.shape();
  const Shape& ws = kernels.shape();
  RequireRank(xs, 4, "conv2d", "input");
  RequireRank(ws, 4, "conv2d", "kernels");
  Require(ws[1] == xs[1], ErrorKind::kDimension,
          "conv2d: kernel channels " + std::to_string(ws[1]) +
              " do not match input channels " + std::to_string(xs[1]) + " (axis 1)");
  const std::size_t n = xs[0], f = ws[0];
  const Window2d g = MakeWindow("conv2d", xs[1], xs[2], xs[3], ws[2], ws[3], stride, pad);
  if (bias) {
    Require(bias->value().size() == f, ErrorKind::kDimension,
            "conv2d: bias length must equal kernel count (axis 0)");
  }

  Tape<T>& tape = input.tape();
  auto cols = std::make_shared<std::vector<T>>(n * g.patch() * g.positions());
  Tensor<T> out({n, f, g.out_h, g.out_w});
  const T* x = input.value().data();
  const std::size_t in_stride = g.channels * g.height * g.width;
  const std::size_t out_stride = f * g.positions();
  auto w = AsMat(kernels.value().data(), f, g.patch());
  for (std::size_t i = 0; i < n; ++i) {
    T* c = cols->data() + i * g.patch() * g.positions();
    Im2Col(x + i * in_stride, g, c);
    auto y = AsMat(out.data() + i * out_stride, f, g.positions());
    y.noalias() = w * AsMat(static_cast<const T*>(c), g.patch(), g.positions());
    if (bias) {
      const T* b = bias->value().data();
      for (std::size_t k = 0; k < f; ++k) y.row(static_cast<Eigen::Index>(k)).array() += b[k];
    }
  }

  std::vector<std::size_t> inputs{input.id(), kernels.id()};
  if (bias) inputs.push_back(bias->id());
  const bool has_bias = bias != nullptr;
  return tape.Record(
      std::move(out), inputs,
      [g, n, f, cols, has_bias, in_stride, out_stride](Tape<T>& t, std::size_t self) {
        const auto& ins = t.inputs(self);
        const T* dy = t.grad(self).data();
        const std::size_t xid = ins[0], wid = ins[1];
        auto w = AsMat(t.value(wid).data(), f, g.patch());
        std::vector<T> dcols(t.needs_grad(xid) ? g.patch() * g.positions() : 0);
        for (std::size_t i = 0; i < n; ++i) {
          auto dyi = AsMat(dy + i * out_stride, f, g.positions());
          const T* c = cols->data() + i * g.patch() * g.positions();
          if (t.needs_grad(wid)) {
            AsMat(t.grad(wid).data(), f, g.patch()).noalias() +=
                dyi * AsMat(c, g.patch(), g.positions()).transpose();
          }
          if (has_bias && t.needs_grad(ins[2])) {
            T* db = t.grad(ins[2]).data();
            for (std::size_t k = 0; k < f; ++k) db[k] += dyi.row(static_cast<Eigen::Index>(k)).sum();
          }
          if (t.needs_grad(xid)) {
            AsMat(dcols.data(), g.patch(), g.positions()).noalias() = w.transpose() * dyi;
            Col2Im(dcols.data(), g, t.grad(xid).data() + i * in_stride);
          }
        }
      },
      "conv2d");
}

// Adjoint of Conv2d with the same kernel tensor. input N x F x H x W, kernels
// F x C x kh x kw, bias C or absent. Output N x C x H' x W' with
// H' = (H - 1) * stride - 2 pad + kh.
template <typename T>
Var<T> TransposedConv2d(const Var<T>& input, const Var<T>& kernels, const Var<T>* bias,
                        std::size_t stride, std::size_t pad) {
  using namespace detail;
  const Shape& xs = input.shape();
  const Shape& ws = kernels.shape();
  RequireRank(xs, 4, "transposed_conv2d", "input");
  RequireRank(ws, 4, "transposed_conv2d", "kernels");
  Require(ws[0] == xs[1], ErrorKind::kDimension,
          "transposed_conv2d: kernel input channels " + std::to_string(ws[0]) +
              " do not match input channels " + std::to_string(xs[1]) + " (axis 1)");
  Require(stride >= 1, ErrorKind::kInvalidInput, "transposed_conv2d: stride must be >= 1");
  const std::size_t n = xs[0], f = ws[0], c_out = ws[1];
  const std::ptrdiff_t oh = static_cast<std::ptrdiff_t>((xs[2] - 1) * stride + ws[2]) -
                            static_cast<std::ptrdiff_t>(2 * pad);
  const std::ptrdiff_t ow = static_cast<std::ptrdiff_t>((xs[3] - 1) * stride + ws[3]) -
                            static_cast<std::ptrdiff_t>(2 * pad);
  Require(oh > 0, ErrorKind::kDimension, "transposed_conv2d: padding leaves no output rows (axis 2)");
  Require(ow > 0, ErrorKind::kDimension, "transposed_conv2d: padding leaves no output columns (axis 3)");
  // Geometry of the equivalent forward convolution on the output image.
  const Window2d g = MakeWindow("transposed_conv2d", c_out, static_cast<std::size_t>(oh),
                                static_cast<std::size_t>(ow), ws[2], ws[3], stride, pad);
  Require(g.out_h == xs[2] && g.out_w == xs[3], ErrorKind::kDimension,
          "transposed_conv2d: inconsistent geometry");
  if (bias) {
    Require(bias->value().size() == c_out, ErrorKind::kDimension,
            "transposed_conv2d: bias length must equal output channels");
  }

  Tape<T>& tape = input.tape();
  Tensor<T> out({n, c_out, g.height, g.width});
  const std::size_t in_stride = f * g.positions();
  const std::size_t out_stride = c_out * g.height * g.width;
  auto w = AsMat(kernels.value().data(), f, g.patch());
  std::vector<T> cols(g.patch() * g.positions());
  for (std::size_t i = 0; i < n; ++i) {
    AsMat(cols.data(), g.patch(), g.positions()).noalias() =
        w.transpose() * AsMat(input.value().data() + i * in_stride, f, g.positions());
    T* o = out.data() + i * out_stride;
    Col2Im(cols.data(), g, o);
    if (bias) {
      const T* b = bias->value().data();
      const std::size_t plane = g.height * g.width;
      for (std::size_t c = 0; c < c_out; ++c) {
        for (std::size_t k = 0; k < plane; ++k) o[c * plane + k] += b[c];
      }
    }
  }

  std::vector<std::size_t> inputs{input.id(), kernels.id()};
  if (bias) inputs.push_back(bias->id());
  const bool has_bias = bias != nullptr;
  return tape.Record(
      std::move(out), inputs,
      [g, n, f, c_out, has_bias, in_stride, out_stride](Tape<T>& t, std::size_t self) {
        const auto& ins = t.inputs(self);
        const T* dy = t.grad(self).data();
        const std::size_t xid = ins[0], wid = ins[1];
        auto w = AsMat(t.value(wid).data(), f, g.patch());
        std::vector<T> dcols(g.patch() * g.positions());
        const std::size_t plane = g.height * g.width;
        for (std::size_t i = 0; i < n; ++i) {
          Im2Col(dy + i * out_stride, g, dcols.data());
          auto dc = AsMat(static_cast<const T*>(dcols.data()), g.patch(), g.positions());
          if (t.needs_grad(xid)) {
            AsMat(t.grad(xid).data() + i * in_stride, f, g.positions()).noalias() += w * dc;
          }
          if (t.needs_grad(wid)) {
            AsMat(t.grad(wid).data(), f, g.patch()).noalias() +=
                AsMat(t.value(xid).data() + i * in_stride, f, g.positions()) * dc.transpose();
          }
          if (has_bias && t.needs_grad(ins[2])) {
            T* db = t.grad(ins[2]).data();
            for (std::size_t c = 0; c < c_out; ++c) {
              const T* row = dy + i * out_stride + c * plane;
              T s = 0;
              for (std::size_t k = 0; k < plane; ++k) s += row[k];
              db[c] += s;
            }
          }
        }
      },
      "transposed_conv2d");
}

// Max over window x window patches. Backward routes each output gradient to
// the first maximal position of its window.
template <typename T>
Var<T> MaxPool2d(const Var<T>& input, std::size_t window, std::size_t stride) {
  const Shape& xs = input.shape();
  detail::RequireRank(xs, 4, "maxpool2d", "input");
  Require(window >= 1 && stride >= 1, ErrorKind::kInvalidInput,
          "maxpool2d: window and stride must be >= 1");
  Require(window <= xs[2], ErrorKind::kDimension,
          "maxpool2d: window " + std::to_string(window) + " larger than input height " +
              std::to_string(xs[2]) + " (axis 2)");
  Require(window <= xs[3], ErrorKind::kDimension,
          "maxpool2d: window " + std::to_string(window) + " larger than input width " +
              std::to_string(xs[3]) + " (axis 3)");
  const std::size_t planes = xs[0] * xs[1], h = xs[2], w = xs[3];
  const std::size_t oh = (h - window) / stride + 1, ow = (w - window) / stride + 1;
  Tensor<T> out({xs[0], xs[1], oh, ow});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  const T* x = input.value().data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = p * h * w + oy * stride * w + ox * stride;
        for (std::size_t ky = 0; ky < window; ++ky) {
          for (std::size_t kx = 0; kx < window; ++kx) {
            const std::size_t idx = p * h * w + (oy * stride + ky) * w + ox * stride + kx;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t o = (p * oh + oy) * ow + ox;
        out[o] = x[best];
        (*argmax)[o] = best;
      }
    }
  }
  return input.tape().Record(
      std::move(out), {input.id()},
      [argmax](Tape<T>& t, std::size_t self) {
        const std::size_t xid = t.inputs(self)[0];
        if (!t.needs_grad(xid)) return;
        const T* dy = t.grad(self).data();
        T* dx = t.grad(xid).data();
        for (std::size_t o = 0; o < argmax->size(); ++o) dx[(*argmax)[o]] += dy[o];
      },
      "maxpool2d");
}

// Affine map input(N x I) * weights(I x O) + bias(O).
template <typename T>
Var<T> Dense(const Var<T>& input, const Var<T>& weights, const Var<T>& bias) {
  using namespace detail;
  const Shape& xs = input.shape();
  const Shape& ws = weights.shape();
  RequireRank(xs, 2, "dense", "input");
  RequireRank(ws, 2, "dense", "weights");
  Require(xs[1] == ws[0], ErrorKind::kDimension,
          "dense: input width " + std::to_string(xs[1]) + " does not match weight rows " +
              std::to_string(ws[0]) + " (inner axis)");
  Require(bias.value().size() == ws[1], ErrorKind::kDimension,
          "dense: bias length must equal output width");
  const std::size_t n = xs[0], in = xs[1], outw = ws[1];
  Tensor<T> out({n, outw});
  auto y = AsMat(out.data(), n, outw);
  y.noalias() = AsMat(input.value().data(), n, in) * AsMat(weights.value().data(), in, outw);
  const T* b = bias.value().data();
  for (std::size_t i = 0; i < n; ++i) {
    T* row = out.data() + i * outw;
    for (std::size_t j = 0; j < outw; ++j) row[j] += b[j];
  }
  return input.tape().Record(
      std::move(out), {input.id(), weights.id(), bias.id()},
      [n, in, outw](Tape<T>& t, std::size_t self) {
        const auto& ins = t.inputs(self);
        auto dy = AsMat(static_cast<const T*>(t.grad(self).data()), n, outw);
        if (t.needs_grad(ins[0])) {
          AsMat(t.grad(ins[0]).data(), n, in).noalias() +=
              dy * AsMat(t.value(ins[1]).data(), in, outw).transpose();
        }
        if (t.needs_grad(ins[1])) {
          AsMat(t.grad(ins[1]).data(), in, outw).noalias() +=
              AsMat(t.value(ins[0]).data(), n, in).transpose() * dy;
        }
        if (t.needs_grad(ins[2])) {
          T* db = t.grad(ins[2]).data();
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < outw; ++j) db[j] += dy(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          }
        }
      },
      "dense");
}

template <typename T>
Var<T> Relu(const Var<T>& input) {
  Tensor<T> out = input.value();
  for (auto& v : out.storage()) v = v > T(0) ? v : T(0);
  return input.tape().Record(
      std::move(out), {input.id()},
      [](Tape<T>& t, std::size_t self) {
        const std::size_t xid = t.inputs(self)[0];
        if (!t.needs_grad(xid)) return;
        const T* x = t.value(xid).data();
        const T* dy = t.grad(self).data();
        T* dx = t.grad(xid).data();
        const std::size_t n = t.value(xid).size();
        for (std::size_t i = 0; i < n; ++i) {
          if (x[i] > T(0)) dx[i] += dy[i];
        }
      },
      "relu");
}

template <typename T>
Var<T> Sigmoid(const Var<T>& input) {
  Tensor<T> out = input.value();
  for (auto& v : out.storage()) {
    v = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
  }
  return input.tape().Record(
      std::move(out), {input.id()},
      [](Tape<T>& t, std::size_t self) {
        const std::size_t xid = t.inputs(self)[0];
        if (!t.needs_grad(xid)) return;
        const T* y = t.value(self).data();
        const T* dy = t.grad(self).data();
        T* dx = t.grad(xid).data();
        for (std::size_t i = 0; i < t.value(self).size(); ++i) dx[i] += dy[i] * y[i] * (T(1) - y[i]);
      },
      "sigmoid");
}

// Inverted dropout: in training, each element is zeroed with probability
// `rate` and survivors are scaled by 1/(1 - rate). Identity otherwise.
template <typename T>
Var<T> Dropout(const Var<T>& input, double rate, Rng& rng, bool training) {
  Require(rate >= 0.0 && rate < 1.0, ErrorKind::kInvalidInput,
          "dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return input;
  const T keep_scale = T(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<T>>(input.value().size());
  Tensor<T> out = input.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = rng.Uniform() < rate ? T(0) : keep_scale;
    out[i] *= (*mask)[i];
  }
  return input.tape().Record(
      std::move(out), {input.id()},
      [mask](Tape<T>& t, std::size_t self) {
        const std::size_t xid = t.inputs(self)[0];
        if (!t.needs_grad(xid)) return;
        const T* dy = t.grad(self).data();
        T* dx = t.grad(xid).data();
        for (std::size_t i = 0; i < mask->size(); ++i) dx[i] += dy[i] * (*mask)[i];
      },
      "dropout");
}

template <typename T>
Var<T> Reshape(const Var<T>& input, Shape shape) {
  Tensor<T> out = input.value().Reshaped(std::move(shape));
  return input.tape().Record(
      std::move(out), {input.id()},
      [](Tape<T>& t, std::size_t self) {
        const std::size_t xid = t.inputs(self)[0];
        if (!t.needs_grad(xid)) return;
        const T* dy = t.grad(self).data();
        T* dx = t.grad(xid).data();
        for (std::size_t i = 0; i < t.value(self).size(); ++i) dx[i] += dy[i];
      },
      "reshape");
}

// N x ... -> N x (product of the rest)
template <typename T>
Var<T> Flatten(const Var<T>& input) {
  const std::size_t n = input.dim(0);
  return Reshape(input, {n, n == 0 ? 0 : input.value().size() / n});
}

// [a | b] along axis 1 for two N x P and N x Q matrices.
template <typename T>
Var<T> ConcatColumns(const Var<T>& a, const Var<T>& b) {
  detail::RequireRank(a.shape(), 2, "concat", "left operand");
  detail::RequireRank(b.shape(), 2, "concat", "right operand");
  Require(a.dim(0) == b.dim(0), ErrorKind::kDimension,
          "concat: row counts differ (axis 0)");
  const std::size_t n = a.dim(0), p = a.dim(1), q = b.dim(1);
  Tensor<T> out({n, p + q});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.value().data() + i * p, p, out.data() + i * (p + q));
    std::copy_n(b.value().data() + i * q, q, out.data() + i * (p + q) + p);
  }
  return a.tape().Record(
      std::move(out), {a.id(), b.id()},
      [n, p, q](Tape<T>& t, std::size_t self) {
        const auto& ins = t.inputs(self);
        const T* dy = t.grad(self).data();
        if (t.needs_grad(ins[0])) {
          T* da = t.grad(ins[0]).data();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < p; ++j) da[i * p + j] += dy[i * (p + q) + j];
        }
        if (t.needs_grad(ins[1])) {
          T* db = t.grad(ins[1]).data();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < q; ++j) db[i * q + j] += dy[i * (p + q) + p + j];
        }
      },
      "concat");
}

// Crops or zero-pads the two spatial axes (bottom/right) to height x width.
template <typename T>
Var<T> FitSpatial(const Var<T>& input, std::size_t height, std::size_t width) {
  const Shape& xs = input.shape();
  detail::RequireRank(xs, 4, "fit_spatial", "input");
  if (xs[2] == height && xs[3] == width) return input;
  const std::size_t planes = xs[0] * xs[1], h = xs[2], w = xs[3];
  const std::size_t ch = std::min(h, height), cw = std::min(w, width);
  Tensor<T> out({xs[0], xs[1], height, width});
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < ch; ++y)
      for (std::size_t x = 0; x < cw; ++x)
        out[(p * height + y) * width + x] = input.value()[(p * h + y) * w + x];
  return input.tape().Record(
      std::move(out), {input.id()},
      [planes, h, w, height, width, ch, cw](Tape<T>& t, std::size_t self) {
        const std::size_t xid = t.inputs(self)[0];
        if (!t.needs_grad(xid)) return;
        const T* dy = t.grad(self).data();
        T* dx = t.grad(xid).data();
        for (std::size_t p = 0; p < planes; ++p)
          for (std::size_t y = 0; y < ch; ++y)
            for (std::size_t x = 0; x < cw; ++x)
              dx[(p * h + y) * w + x] += dy[(p * height + y) * width + x];
      },
      "fit_spatial");
}

// Rows `rows` of the first axis, in the given order (repeats allowed).
template <typename T>
Var<T> GatherRows(const Var<T>& input, const std::vector<std::size_t>& rows) {
  const Shape& xs = input.shape();
  Require(!xs.empty(), ErrorKind::kDimension, "gather_rows: scalar input");
  const std::size_t n = xs[0];
  const std::size_t stride = n == 0 ? 0 : input.value().size() / n;
  for (std::size_t r : rows) {
    Require(r < n, ErrorKind::kDimension,
            "gather_rows: row " + std::to_string(r) + " outside [0, " + std::to_string(n) + ")");
  }
  Shape os = xs;
  os[0] = rows.size();
  Tensor<T> out(os);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::copy_n(input.value().data() + rows[k] * stride, stride, out.data() + k * stride);
  }
  return input.tape().Record(
      std::move(out), {input.id()},
      [rows, stride](Tape<T>& t, std::size_t self) {
        const std::size_t xid = t.inputs(self)[0];
        if (!t.needs_grad(xid)) return;
        const T* dy = t.grad(self).data();
        T* dx = t.grad(xid).data();
        for (std::size_t k = 0; k < rows.size(); ++k)
          for (std::size_t j = 0; j < stride; ++j) dx[rows[k] * stride + j] += dy[k * stride + j];
      },
      "gather_rows");
}

template <typename T>
Var<T> Add(const Var<T>& a, const Var<T>& b) {
  Require(a.shape() == b.shape(), ErrorKind::kDimension,
          "add: shapes " + ShapeString(a.shape()) + " and " + ShapeString(b.shape()) +
              " differ");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.tape().Record(
      std::move(out), {a.id(), b.id()},
      [](Tape<T>& t, std::size_t self) {
        const T* dy = t.grad(self).data();
        const std::size_t n = t.value(self).size();
        for (std::size_t in : t.inputs(self)) {
          if (!t.needs_grad(in)) continue;
          T* dx = t.grad(in).data();
          for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i];
        }
      },
      "add");
}

template <typename T>
Var<T> Scale(const Var<T>& a, T factor) {
  Tensor<T> out = a.value();
  for (auto& v : out.storage()) v *= factor;
  return a.tape().Record(
      std::move(out), {a.id()},
      [factor](Tape<T>& t, std::size_t self) {
        const std::size_t xid = t.inputs(self)[0];
        if (!t.needs_grad(xid)) return;
        const T* dy = t.grad(self).data();
        T* dx = t.grad(xid).data();
        for (std::size_t i = 0; i < t.value(self).size(); ++i) dx[i] += factor * dy[i];
      },
      "scale");
}

// Sum of all elements, as a 1-element tensor.
template <typename T>
Var<T> Sum(const Var<T>& a) {
  T s = 0;
  for (T v : a.value().values()) s += v;
  return a.tape().Record(
      Tensor<T>({1}, std::vector<T>{s}), {a.id()},
      [](Tape<T>& t, std::size_t self) {
        const std::size_t xid = t.inputs(self)[0];
        if (!t.needs_grad(xid)) return;
        const T g = t.grad(self)[0];
        for (auto& v : t.grad(xid).storage()) v += g;
      },
      "sum");
}

// Squared L2 distance per row (first axis), averaged over rows.
template <typename T>
Var<T> SquaredError(const Var<T>& a, const Var<T>& b) {
  Require(a.shape() == b.shape(), ErrorKind::kDimension,
          "squared_error: shapes " + ShapeString(a.shape()) + " and " +
              ShapeString(b.shape()) + " differ");
  Require(a.value().rank() >= 1 && a.dim(0) > 0, ErrorKind::kInvalidInput,
          "squared_error: empty batch");
  const T inv_n = T(1) / static_cast<T>(a.dim(0));
  T s = 0;
  for (std::size_t i = 0; i < a.value().size(); ++i) {
    const T d = a.value()[i] - b.value()[i];
    s += d * d;
  }
  return a.tape().Record(
      Tensor<T>({1}, std::vector<T>{s * inv_n}), {a.id(), b.id()},
      [inv_n](Tape<T>& t, std::size_t self) {
        const auto& ins = t.inputs(self);
        const T g = t.grad(self)[0] * T(2) * inv_n;
        const Tensor<T>& av = t.value(ins[0]);
        const Tensor<T>& bv = t.value(ins[1]);
        if (t.needs_grad(ins[0])) {
          T* da = t.grad(ins[0]).data();
          for (std::size_t i = 0; i < av.size(); ++i) da[i] += g * (av[i] - bv[i]);
        }
        if (t.needs_grad(ins[1])) {
          T* db = t.grad(ins[1]).data();
          for (std::size_t i = 0; i < av.size(); ++i) db[i] -= g * (av[i] - bv[i]);
        }
      },
      "squared_error");
}

// Mean of log(p) (complement = false) or log(1 - p) (complement = true) over
// all elements, with p clamped to [eps, 1 - eps]. The clamp passes zero
// gradient where it is active.
template <typename T>
Var<T> MeanLogProb(const Var<T>& probs, bool complement, T eps) {
  const std::size_t n = probs.value().size();
  Require(n > 0, ErrorKind::kInvalidInput, "mean_log_prob: empty input");
  T s = 0;
  for (T p : probs.value().values()) {
    const T q = detail::ClampProb(p, eps);
    s += complement ? std::log(T(1) - q) : std::log(q);
  }
  return probs.tape().Record(
      Tensor<T>({1}, std::vector<T>{s / static_cast<T>(n)}), {probs.id()},
      [complement, eps, n](Tape<T>& t, std::size_t self) {
        const std::size_t xid = t.inputs(self)[0];
        if (!t.needs_grad(xid)) return;
        const T g = t.grad(self)[0] / static_cast<T>(n);
        const T* p = t.value(xid).data();
        T* dx = t.grad(xid).data();
        for (std::size_t i = 0; i < n; ++i) {
          if (p[i] < eps || p[i] > T(1) - eps) continue;
          dx[i] += complement ? -g / (T(1) - p[i]) : g / p[i];
        }
      },
      "mean_log_prob");
}

// Row-wise softmax, no tape.
template <typename T>
Tensor<T> Softmax(const Tensor<T>& logits) {
  detail::RequireRank(logits.shape(), 2, "softmax", "logits");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor<T> out(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.data() + i * k;
    T* o = out.data() + i * k;
    const T m = *std::max_element(row, row + k);
    T z = 0;
    for (std::size_t j = 0; j < k; ++j) z += (o[j] = std::exp(row[j] - m));
    for (std::size_t j = 0; j < k; ++j) o[j] /= z;
  }
  return out;
}

// Mean softmax cross-entropy of N x K logits against integer labels.
template <typename T>
Var<T> SoftmaxCrossEntropy(const Var<T>& logits, const std::vector<int>& labels) {
  detail::RequireRank(logits.shape(), 2, "cross_entropy", "logits");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Require(labels.size() == n, ErrorKind::kDimension,
          "cross_entropy: label count does not match batch rows");
  Require(n > 0, ErrorKind::kInvalidInput, "cross_entropy: empty batch");
  for (int y : labels) {
    Require(y >= 0 && static_cast<std::size_t>(y) < k, ErrorKind::kInvalidInput,
            "cross_entropy: label " + std::to_string(y) + " outside [0, " +
                std::to_string(k) + ")");
  }
  auto probs = std::make_shared<Tensor<T>>(Softmax(logits.value()));
  T loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.value().data() + i * k;
    const T m = *std::max_element(row, row + k);
    T z = 0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - m);
    loss += m + std::log(z) - row[labels[i]];
  }
  return logits.tape().Record(
      Tensor<T>({1}, std::vector<T>{loss / static_cast<T>(n)}), {logits.id()},
      [probs, labels, n, k](Tape<T>& t, std::size_t self) {
        const std::size_t xid = t.inputs(self)[0];
        if (!t.needs_grad(xid)) return;
        const T g = t.grad(self)[0] / static_cast<T>(n);
        T* dx = t.grad(xid).data();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            const T target = static_cast<std::size_t>(labels[i]) == j ? T(1) : T(0);
            dx[i * k + j] += g * ((*probs)[i * k + j] - target);
          }
        }
      },
      "cross_entropy");
}

}  // namespace addi::ad
