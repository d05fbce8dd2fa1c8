// addi/autodiff/checkpoint.hpp

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

// Checkpoint layout (all integers little-endian):
//
//   "ADCK"  u16 version
//   u32 parameter count, then per parameter:
//     u16 name length, name bytes, u8 rank, u32 dims[rank], f32 values[]
//   u32 optimizer count, then per optimizer:
//     u16 name length, name bytes, u64 step, f64 beta1, f64 beta2, f64 epsilon,
//     u32 moment count, then per moment:
//       u16 name length, name bytes, u8 rank, u32 dims[rank],
//       f32 first[], f32 second[]

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "addi/autodiff/adam.hpp"
#include "addi/autodiff/parameters.hpp"
#include "addi/common/binary_io.hpp"

namespace addi::ad {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointEntry {
  Shape shape;
  std::vector<float> values;
};

struct CheckpointOptimizer {
  std::uint64_t step = 0;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  std::map<std::string, std::pair<CheckpointEntry, CheckpointEntry>> moments;
};

// In-memory form of a checkpoint file. Parameter order is preserved.
struct Checkpoint {
  std::vector<std::pair<std::string, CheckpointEntry>> params;
  std::map<std::string, CheckpointOptimizer> optimizers;

  const CheckpointEntry* Find(const std::string& name) const {
    for (const auto& [n, e] : params) {
      if (n == name) return &e;
    }
    return nullptr;
  }
};

namespace detail {

inline void WriteName(std::ostream& os, const std::string& name) {
  io::WriteLe<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
}

inline std::string ReadName(std::istream& is) {
  const auto len = io::ReadLe<std::uint16_t>(is, "name length");
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (!is) Fail(ErrorKind::kIo, "truncated checkpoint name");
  return s;
}

inline void WriteShape(std::ostream& os, const Shape& shape) {
  io::WriteLe<std::uint8_t>(os, static_cast<std::uint8_t>(shape.size()));
  for (auto d : shape) io::WriteLe<std::uint32_t>(os, static_cast<std::uint32_t>(d));
}

inline Shape ReadShape(std::istream& is) {
  const auto rank = io::ReadLe<std::uint8_t>(is, "rank");
  Shape s(rank);
  for (auto& d : s) d = io::ReadLe<std::uint32_t>(is, "dimension");
  return s;
}

inline std::vector<float> ReadFloats(std::istream& is, std::size_t n) {
  std::vector<float> v(n);
  for (auto& x : v) x = io::ReadF32(is, "checkpoint values");
  return v;
}

template <typename T>
CheckpointEntry ToEntry(const Tensor<T>& t) {
  return CheckpointEntry{t.shape(), std::vector<float>(t.values().begin(), t.values().end())};
}

}  // namespace detail

inline void WriteCheckpoint(const std::string& path, const Checkpoint& ckpt) {
  auto os = io::OpenForWrite(path);
  io::WriteMagic(os, "ADCK");
  io::WriteLe<std::uint16_t>(os, kCheckpointVersion);
  io::WriteLe<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [name, e] : ckpt.params) {
    detail::WriteName(os, name);
    detail::WriteShape(os, e.shape);
    for (float v : e.values) io::WriteF32(os, v);
  }
  io::WriteLe<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.optimizers.size()));
  for (const auto& [name, opt] : ckpt.optimizers) {
    detail::WriteName(os, name);
    io::WriteLe<std::uint64_t>(os, opt.step);
    io::WriteF64(os, opt.beta1);
    io::WriteF64(os, opt.beta2);
    io::WriteF64(os, opt.epsilon);
    io::WriteLe<std::uint32_t>(os, static_cast<std::uint32_t>(opt.moments.size()));
    for (const auto& [pname, mv] : opt.moments) {
      detail::WriteName(os, pname);
      detail::WriteShape(os, mv.first.shape);
      for (float v : mv.first.values) io::WriteF32(os, v);
      for (float v : mv.second.values) io::WriteF32(os, v);
    }
  }
  if (!os) Fail(ErrorKind::kIo, "write failed for " + path);
}

inline Checkpoint ReadCheckpoint(const std::string& path) {
  auto is = io::OpenForRead(path);
  io::ExpectMagic(is, "ADCK", path);
  const auto version = io::ReadLe<std::uint16_t>(is, "version");
  Require(version == kCheckpointVersion, ErrorKind::kData,
          path + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  const auto n = io::ReadLe<std::uint32_t>(is, "parameter count");
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = detail::ReadName(is);
    Shape shape = detail::ReadShape(is);
    auto values = detail::ReadFloats(is, NumElements(shape));
    ckpt.params.emplace_back(std::move(name), CheckpointEntry{std::move(shape), std::move(values)});
  }
  const auto nopt = io::ReadLe<std::uint32_t>(is, "optimizer count");
  for (std::uint32_t i = 0; i < nopt; ++i) {
    std::string name = detail::ReadName(is);
    CheckpointOptimizer opt;
    opt.step = io::ReadLe<std::uint64_t>(is, "step");
    opt.beta1 = io::ReadF64(is, "beta1");
    opt.beta2 = io::ReadF64(is, "beta2");
    opt.epsilon = io::ReadF64(is, "epsilon");
    const auto nm = io::ReadLe<std::uint32_t>(is, "moment count");
    for (std::uint32_t j = 0; j < nm; ++j) {
      std::string pname = detail::ReadName(is);
      Shape shape = detail::ReadShape(is);
      auto first = detail::ReadFloats(is, NumElements(shape));
      auto second = detail::ReadFloats(is, NumElements(shape));
      opt.moments[pname] = {CheckpointEntry{shape, std::move(first)},
                            CheckpointEntry{shape, std::move(second)}};
    }
    ckpt.optimizers[name] = std::move(opt);
  }
  return ckpt;
}

// Snapshot of the parameters in `store` (restricted to `namespaces` unless
// empty) plus the given optimizer states.
template <typename T>
Checkpoint MakeCheckpoint(const ParameterStore<T>& store,
                          const std::set<std::string>& namespaces = {},
                          const std::map<std::string, const AdamState<T>*>& optimizers = {}) {
  Checkpoint ckpt;
  for (const auto* p : store.All()) {
    if (!namespaces.empty() && !namespaces.count(NamespaceOf(p->name))) continue;
    ckpt.params.emplace_back(p->name, detail::ToEntry(p->value));
  }
  for (const auto& [name, state] : optimizers) {
    CheckpointOptimizer opt;
    opt.step = state->step;
    opt.beta1 = state->beta1;
    opt.beta2 = state->beta2;
    opt.epsilon = state->epsilon;
    for (const auto& [pname, m] : state->first_moment) {
      opt.moments[pname] = {detail::ToEntry(m), detail::ToEntry(state->second_moment.at(pname))};
    }
    ckpt.optimizers[name] = std::move(opt);
  }
  return ckpt;
}

// Copies every checkpoint parameter in `namespaces` into `store`. Missing
// names or shape differences raise a compatibility error listing them all.
template <typename T>
void LoadParameters(const Checkpoint& ckpt, ParameterStore<T>& store,
                    const std::set<std::string>& namespaces = {}) {
  std::vector<std::string> problems;
  std::set<std::string> seen;
  for (const auto& [name, e] : ckpt.params) {
    if (!namespaces.empty() && !namespaces.count(NamespaceOf(name))) continue;
    seen.insert(name);
    if (!store.Contains(name)) {
      problems.push_back(name + " (absent from model)");
    } else if (store.Get(name).value.shape() != e.shape) {
      problems.push_back(name + " (checkpoint " + ShapeString(e.shape) + ", model " +
                         ShapeString(store.Get(name).value.shape()) + ")");
    }
  }
  for (const auto* p : store.All()) {
    const std::string ns = NamespaceOf(p->name);
    if (!namespaces.empty() && !namespaces.count(ns)) continue;
    if (!seen.count(p->name)) problems.push_back(p->name + " (absent from checkpoint)");
  }
  if (!problems.empty()) {
    std::string msg = "checkpoint does not match model:";
    for (const auto& s : problems) msg += "\n  " + s;
    Fail(ErrorKind::kCompatibility, msg);
  }
  for (const auto& [name, e] : ckpt.params) {
    if (!namespaces.empty() && !namespaces.count(NamespaceOf(name))) continue;
    auto& dst = store.Get(name).value;
    for (std::size_t i = 0; i < e.values.size(); ++i) dst[i] = static_cast<T>(e.values[i]);
  }
}

template <typename T>
AdamState<T> LoadOptimizer(const CheckpointOptimizer& opt) {
  AdamState<T> s;
  s.step = opt.step;
  s.beta1 = opt.beta1;
  s.beta2 = opt.beta2;
  s.epsilon = opt.epsilon;
  for (const auto& [name, mv] : opt.moments) {
    s.first_moment[name] = Tensor<T>(mv.first.shape,
                                     std::vector<T>(mv.first.values.begin(), mv.first.values.end()));
    s.second_moment[name] = Tensor<T>(mv.second.shape,
                                      std::vector<T>(mv.second.values.begin(), mv.second.values.end()));
  }
  return s;
}

}  // namespace addi::ad
