// addi/autodiff/tape.hpp

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

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "addi/autodiff/tensor.hpp"

namespace addi::ad {

template <typename T>
class Tape;

// Handle to a value recorded on a tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t axis) const { return value().dim(axis); }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Ordered record of operations. Nodes are appended in evaluation order, so
// the record is topologically sorted by construction; backward walks it in
// reverse and then clears it.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(bool check_finite =
#ifdef NDEBUG
                    false
#else
                    true
#endif
                )
      : check_finite_(check_finite) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> Constant(Tensor<T> value) {
    nodes_.push_back(Node{std::move(value), {}, false, false, nullptr, {}, {}});
    return Var<T>(this, nodes_.size() - 1);
  }

  // Leaf bound to a parameter; backward accumulates into `param.grad`.
  Var<T> Leaf(Parameter<T>& param) {
    nodes_.push_back(Node{param.value, {}, true, false, &param, {}, {}});
    return Var<T>(this, nodes_.size() - 1);
  }

  // A constant copy of `v`'s value: gradients do not flow through it.
  Var<T> Detach(const Var<T>& v) { return Constant(v.value()); }

  Var<T> Record(Tensor<T> value, std::vector<std::size_t> inputs, BackwardFn fn,
                const char* op_name) {
    if (check_finite_ && !value.AllFinite()) {
      Fail(ErrorKind::kNumeric, std::string("non-finite output from ") + op_name);
    }
    bool needs = false;
    for (std::size_t in : inputs) needs = needs || nodes_[in].needs_grad;
    nodes_.push_back(Node{std::move(value), {}, needs, false, nullptr,
                          needs ? std::move(fn) : BackwardFn{}, std::move(inputs)});
    return Var<T>(this, nodes_.size() - 1);
  }

  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  const std::vector<std::size_t>& inputs(std::size_t id) const {
    return nodes_[id].inputs;
  }

  // Gradient buffer for node `id`, allocated (zeroed) on first access.
  Tensor<T>& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
      n.grad = Tensor<T>(n.value.shape());
      n.has_grad = true;
    }
    return n.grad;
  }

  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from a scalar loss. Gradients add up over all paths.
  // The tape is cleared afterwards.
  void Backward(const Var<T>& loss) {
    Require(loss.value().size() == 1, ErrorKind::kInvalidInput,
            "backward requires a scalar loss, got shape " +
                ShapeString(loss.value().shape()));
    Require(loss.id() < nodes_.size(), ErrorKind::kInvalidInput,
            "loss is not on this tape");
    if (nodes_[loss.id()].needs_grad) {
      grad(loss.id())[0] = T(1);
      for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.needs_grad || !n.has_grad) continue;
        if (n.param != nullptr) {
          T* dst = n.param->grad.data();
          const T* src = n.grad.data();
          for (std::size_t k = 0; k < n.grad.size(); ++k) dst[k] += src[k];
        } else if (n.backward) {
          n.backward(*this, i);
        }
      }
    }
    Clear();
  }

  void Clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool needs_grad;
    bool has_grad;
    Parameter<T>* param;
    BackwardFn backward;
    std::vector<std::size_t> inputs;
  };

  std::vector<Node> nodes_;
  bool check_finite_;
};

}  // namespace addi::ad
