// addi/autodiff/parameters.hpp

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

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "addi/autodiff/tensor.hpp"
#include "addi/common/binary_io.hpp"

namespace addi::ad {

// The component namespace of a parameter is the prefix before the first '.',
// e.g. "E.conv1.weight" belongs to "E".
inline std::string NamespaceOf(const std::string& name) {
  return name.substr(0, name.find('.'));
}

// Named parameters in insertion order. Addresses are stable for the lifetime
// of the store, so tapes may hold raw pointers into it.
template <typename T>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore& other) { *this = other; }
  ParameterStore& operator=(const ParameterStore& other) {
    if (this == &other) return *this;
    params_.clear();
    index_.clear();
    for (const auto& p : other.params_) Add(p->name, p->value);
    return *this;
  }
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  Parameter<T>& Add(const std::string& name, Tensor<T> value) {
    Require(!index_.count(name), ErrorKind::kInvalidInput,
            "duplicate parameter name " + name);
    params_.push_back(std::make_unique<Parameter<T>>(name, std::move(value)));
    index_[name] = params_.size() - 1;
    return *params_.back();
  }

  bool Contains(const std::string& name) const { return index_.count(name) > 0; }

  Parameter<T>& Get(const std::string& name) {
    auto it = index_.find(name);
    Require(it != index_.end(), ErrorKind::kInvalidInput, "no parameter named " + name);
    return *params_[it->second];
  }
  const Parameter<T>& Get(const std::string& name) const {
    auto it = index_.find(name);
    Require(it != index_.end(), ErrorKind::kInvalidInput, "no parameter named " + name);
    return *params_[it->second];
  }

  std::size_t size() const { return params_.size(); }

  std::vector<Parameter<T>*> All() {
    std::vector<Parameter<T>*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }
  std::vector<const Parameter<T>*> All() const {
    std::vector<const Parameter<T>*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }

  // Parameters whose namespace is one of `namespaces`.
  std::vector<Parameter<T>*> InNamespaces(const std::set<std::string>& namespaces) {
    std::vector<Parameter<T>*> out;
    for (auto& p : params_) {
      if (namespaces.count(NamespaceOf(p->name))) out.push_back(p.get());
    }
    return out;
  }

  std::set<std::string> Namespaces() const {
    std::set<std::string> out;
    for (auto& p : params_) out.insert(NamespaceOf(p->name));
    return out;
  }

  std::size_t ScalarCount() const {
    std::size_t n = 0;
    for (auto& p : params_) n += p->value.size();
    return n;
  }

  std::size_t ScalarCount(const std::string& ns) const {
    std::size_t n = 0;
    for (auto& p : params_) {
      if (NamespaceOf(p->name) == ns) n += p->value.size();
    }
    return n;
  }

  void ZeroGrad() {
    for (auto& p : params_) p->ZeroGrad();
  }

  // Bitwise hash of the values of every parameter in namespace `ns`
  // (all parameters when `ns` is empty).
  std::uint64_t Hash(const std::string& ns = "") const {
    io::Fnv1a h;
    for (auto& p : params_) {
      if (!ns.empty() && NamespaceOf(p->name) != ns) continue;
      h.Update(p->name);
      h.Update(p->value.data(), p->value.size() * sizeof(T));
    }
    return h.Digest();
  }

  std::map<std::string, std::uint64_t> HashByNamespace() const {
    std::map<std::string, std::uint64_t> out;
    for (const auto& ns : Namespaces()) out[ns] = Hash(ns);
    return out;
  }

  // Copy values (not gradients) from `other` for every name present in both.
  void CopyValuesFrom(const ParameterStore& other) {
    for (auto& p : params_) {
      if (other.Contains(p->name)) p->value = other.Get(p->name).value;
    }
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace addi::ad
