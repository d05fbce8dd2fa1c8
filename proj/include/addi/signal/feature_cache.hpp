// addi/signal/feature_cache.hpp

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

// Feature cache files, one per utterance:
//   "ADFB" u16 version, u16 n_mels, u32 T, u32 n_frames_valid,
//   then n_mels * T little-endian f32 values, row-major.

#pragma once

#include <cstdint>
#include <string>

#include "addi/common/binary_io.hpp"
#include "addi/signal/features.hpp"

namespace addi::signal {

inline constexpr std::uint16_t kFeatureCacheVersion = 1;

inline void WriteFeatureCache(const std::string& path, const FeatureMatrix& f) {
  Require(f.values.size() == f.n_mels * f.n_frames, ErrorKind::kDimension,
          "feature matrix value count does not match its shape");
  auto os = io::OpenForWrite(path);
  io::WriteMagic(os, "ADFB");
  io::WriteLe<std::uint16_t>(os, kFeatureCacheVersion);
  io::WriteLe<std::uint16_t>(os, static_cast<std::uint16_t>(f.n_mels));
  io::WriteLe<std::uint32_t>(os, static_cast<std::uint32_t>(f.n_frames));
  io::WriteLe<std::uint32_t>(os, static_cast<std::uint32_t>(f.n_frames_valid));
  for (float v : f.values) io::WriteF32(os, v);
  if (!os) Fail(ErrorKind::kIo, "write failed for " + path);
}

inline FeatureMatrix ReadFeatureCache(const std::string& path) {
  auto is = io::OpenForRead(path);
  io::ExpectMagic(is, "ADFB", path);
  const auto version = io::ReadLe<std::uint16_t>(is, "version");
  Require(version == kFeatureCacheVersion, ErrorKind::kData,
          path + ": unsupported feature cache version " + std::to_string(version));
  FeatureMatrix f;
  f.n_mels = io::ReadLe<std::uint16_t>(is, "n_mels");
  f.n_frames = io::ReadLe<std::uint32_t>(is, "T");
  f.n_frames_valid = io::ReadLe<std::uint32_t>(is, "n_frames_valid");
  Require(f.n_frames_valid <= f.n_frames, ErrorKind::kData,
          path + ": valid frame count exceeds T");
  f.values.resize(f.n_mels * f.n_frames);
  for (auto& v : f.values) v = io::ReadF32(is, path);
  for (std::size_t m = 0; m < f.n_mels; ++m) {
    for (std::size_t t = f.n_frames_valid; t < f.n_frames; ++t) {
      Require(f.at(m, t) == 0.0f, ErrorKind::kData, path + ": non-zero padding column");
    }
  }
  return f;
}

}  // namespace addi::signal
