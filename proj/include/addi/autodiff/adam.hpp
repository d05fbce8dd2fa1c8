// addi/autodiff/adam.hpp

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

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "addi/autodiff/tensor.hpp"

namespace addi::ad {

// Moment accumulators are keyed by parameter name and created on first use.
template <typename T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::map<std::string, Tensor<T>> first_moment;
  std::map<std::string, Tensor<T>> second_moment;
};

// One bias-corrected Adam update of `values[i]` with `grads[i]`.
template <typename T>
void AdamStep(const std::vector<std::string>& names, const std::vector<Tensor<T>*>& values,
              const std::vector<const Tensor<T>*>& grads, AdamState<T>& state, double lr) {
  Require(names.size() == values.size() && values.size() == grads.size(),
          ErrorKind::kDimension, "adam: parameter and gradient lists differ in length");
  for (std::size_t i = 0; i < values.size(); ++i) {
    Require(values[i]->shape() == grads[i]->shape(), ErrorKind::kDimension,
            "adam: gradient shape " + ShapeString(grads[i]->shape()) +
                " does not match parameter " + names[i] + " of shape " +
                ShapeString(values[i]->shape()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto [mit, m_new] = state.first_moment.try_emplace(names[i], values[i]->shape());
    auto [vit, v_new] = state.second_moment.try_emplace(names[i], values[i]->shape());
    Require(mit->second.shape() == values[i]->shape(), ErrorKind::kDimension,
            "adam: moment shape mismatch for " + names[i]);
    T* p = values[i]->data();
    const T* g = grads[i]->data();
    T* m = mit->second.data();
    T* v = vit->second.data();
    for (std::size_t k = 0; k < values[i]->size(); ++k) {
      m[k] = b1 * m[k] + (T(1) - b1) * g[k];
      v[k] = b2 * v[k] + (T(1) - b2) * g[k] * g[k];
      const double mhat = static_cast<double>(m[k]) / c1;
      const double vhat = static_cast<double>(v[k]) / c2;
      p[k] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + state.epsilon));
    }
  }
}

template <typename T>
void AdamStep(const std::vector<Parameter<T>*>& params, AdamState<T>& state, double lr) {
  std::vector<std::string> names;
  std::vector<Tensor<T>*> values;
  std::vector<const Tensor<T>*> grads;
  for (auto* p : params) {
    names.push_back(p->name);
    values.push_back(&p->value);
    grads.push_back(&p->grad);
  }
  AdamStep(names, values, grads, state, lr);
}

}  // namespace addi::ad
