// addi/signal/wav.hpp

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

// Minimal RIFF/WAVE support: mono 16-bit PCM or 32-bit IEEE float.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <string>

#include "addi/common/binary_io.hpp"
#include "addi/signal/features.hpp"

namespace addi::signal {

inline AudioClip ReadWav(const std::string& path) {
  auto is = io::OpenForRead(path);
  char tag[4];
  auto read_tag = [&](const char* what) {
    is.read(tag, 4);
    if (!is) Fail(ErrorKind::kData, path + ": truncated WAV header (" + what + ")");
  };
  read_tag("RIFF");
  Require(std::memcmp(tag, "RIFF", 4) == 0, ErrorKind::kData, path + ": not a RIFF file");
  io::ReadLe<std::uint32_t>(is, "riff size");
  read_tag("WAVE");
  Require(std::memcmp(tag, "WAVE", 4) == 0, ErrorKind::kData, path + ": not a WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (true) {
    read_tag("chunk");
    const auto size = io::ReadLe<std::uint32_t>(is, "chunk size");
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = io::ReadLe<std::uint16_t>(is, "format");
      channels = io::ReadLe<std::uint16_t>(is, "channels");
      rate = io::ReadLe<std::uint32_t>(is, "rate");
      io::ReadLe<std::uint32_t>(is, "byte rate");
      io::ReadLe<std::uint16_t>(is, "block align");
      bits = io::ReadLe<std::uint16_t>(is, "bits");
      is.seekg(size - 16 + (size & 1), std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      Require(have_fmt, ErrorKind::kData, path + ": data chunk before fmt chunk");
      Require(channels == 1, ErrorKind::kData, path + ": only mono audio is supported");
      AudioClip clip;
      clip.sample_rate = static_cast<int>(rate);
      if (format == 1 && bits == 16) {
        clip.samples.resize(size / 2);
        for (auto& s : clip.samples) {
          s = static_cast<double>(io::ReadLe<std::int16_t>(is, path)) / 32768.0;
        }
      } else if (format == 3 && bits == 32) {
        clip.samples.resize(size / 4);
        for (auto& s : clip.samples) s = io::ReadF32(is, path);
      } else {
        Fail(ErrorKind::kData, path + ": unsupported WAV encoding (format " +
                                   std::to_string(format) + ", " + std::to_string(bits) +
                                   " bits)");
      }
      return clip;
    } else {
      is.seekg(size + (size & 1), std::ios::cur);
    }
  }
}

// Writes 16-bit PCM; samples are clipped to [-1, 1].
inline void WriteWav(const std::string& path, const AudioClip& clip) {
  auto os = io::OpenForWrite(path);
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  os.write("RIFF", 4);
  io::WriteLe<std::uint32_t>(os, 36 + 2 * n);
  os.write("WAVEfmt ", 8);
  io::WriteLe<std::uint32_t>(os, 16);
  io::WriteLe<std::uint16_t>(os, 1);
  io::WriteLe<std::uint16_t>(os, 1);
  io::WriteLe<std::uint32_t>(os, static_cast<std::uint32_t>(clip.sample_rate));
  io::WriteLe<std::uint32_t>(os, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  io::WriteLe<std::uint16_t>(os, 2);
  io::WriteLe<std::uint16_t>(os, 16);
  os.write("data", 4);
  io::WriteLe<std::uint32_t>(os, 2 * n);
  for (double s : clip.samples) {
    const long q = std::lround(s * 32768.0);
    io::WriteLe<std::int16_t>(os, static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L)));
  }
  if (!os) Fail(ErrorKind::kIo, "write failed for " + path);
}

}  // namespace addi::signal
