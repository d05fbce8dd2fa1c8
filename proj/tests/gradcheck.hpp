// tests/gradcheck.hpp

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

// Central finite-difference oracle shared by the test suites and the
// acceptance binary. The loss builder records a scalar on a fresh tape from
// the parameters in `store`; analytic gradients come from one backward pass,
// numeric ones from (L(p + h) - L(p - h)) / 2h per coordinate.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <string>

#include "addi/autodiff/parameters.hpp"
#include "addi/autodiff/tape.hpp"
#include "addi/common/rng.hpp"

namespace addi::testing {

template <typename T>
using LossBuilder = std::function<ad::Var<T>(ad::Tape<T>&, ad::ParameterStore<T>&)>;

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;  // "name[index]" of the worst coordinate
  std::size_t checked = 0;
};

// Relative error |a - n| / max(|a|, |n|, floor); the floor keeps coordinates
// with vanishing gradients from dominating through round-off alone. A
// non-empty `namespaces` restricts the check to parameters the loss is meant
// to train; frozen parts still move the loss numerically.
template <typename T>
GradCheck CheckGradients(ad::ParameterStore<T>& store, const LossBuilder<T>& loss, double h,
                         double floor = 1e-6, std::size_t max_per_param = 0,
                         const std::set<std::string>& namespaces = {}) {
  store.ZeroGrad();
  {
    ad::Tape<T> tape;
    auto l = loss(tape, store);
    tape.Backward(l);
  }
  auto eval = [&]() {
    ad::Tape<T> tape;
    return static_cast<double>(loss(tape, store).value()[0]);
  };
  GradCheck out;
  for (auto* p : namespaces.empty() ? store.All() : store.InNamespaces(namespaces)) {
    const std::size_t n = p->value.size();
    const std::size_t stride = max_per_param && n > max_per_param ? n / max_per_param : 1;
    for (std::size_t i = 0; i < n; i += stride) {
      const T saved = p->value[i];
      p->value[i] = saved + static_cast<T>(h);
      const double up = eval();
      p->value[i] = saved - static_cast<T>(h);
      const double down = eval();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = static_cast<double>(p->grad[i]);
      const double denom = std::max({std::abs(numeric), std::abs(analytic), floor});
      const double rel = std::abs(numeric - analytic) / denom;
      ++out.checked;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

template <typename T>
ad::Tensor<T> RandomTensor(ad::Shape shape, Rng& rng, double scale = 1.0) {
  ad::Tensor<T> t(std::move(shape));
  for (auto& v : t.storage()) v = static_cast<T>(scale * rng.Normal());
  return t;
}

}  // namespace addi::testing
