// addi/common/binary_io.hpp

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

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "addi/common/error.hpp"

namespace addi::io {

// Explicit little-endian encoding, independent of host byte order.
template <typename Int>
  requires std::is_integral_v<Int>
void WriteLe(std::ostream& os, Int value) {
  using U = std::make_unsigned_t<Int>;
  U u = static_cast<U>(value);
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>((u >> (8 * i)) & 0xff);
  }
  os.write(bytes, sizeof(U));
}

inline void WriteF32(std::ostream& os, float value) {
  WriteLe(os, std::bit_cast<std::uint32_t>(value));
}

inline void WriteF64(std::ostream& os, double value) {
  WriteLe(os, std::bit_cast<std::uint64_t>(value));
}

template <typename Int>
  requires std::is_integral_v<Int>
Int ReadLe(std::istream& is, const std::string& what) {
  using U = std::make_unsigned_t<Int>;
  unsigned char bytes[sizeof(U)];
  is.read(reinterpret_cast<char*>(bytes), sizeof(U));
  if (!is) Fail(ErrorKind::kIo, "truncated file while reading " + what);
  U u = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    u |= static_cast<U>(static_cast<U>(bytes[i]) << (8 * i));
  }
  return static_cast<Int>(u);
}

inline float ReadF32(std::istream& is, const std::string& what) {
  return std::bit_cast<float>(ReadLe<std::uint32_t>(is, what));
}

inline double ReadF64(std::istream& is, const std::string& what) {
  return std::bit_cast<double>(ReadLe<std::uint64_t>(is, what));
}

inline void WriteMagic(std::ostream& os, const char (&magic)[5]) {
  os.write(magic, 4);
}

inline void ExpectMagic(std::istream& is, const char (&magic)[5],
                        const std::string& path) {
  char got[4] = {};
  is.read(got, 4);
  if (!is || std::memcmp(got, magic, 4) != 0) {
    Fail(ErrorKind::kData, path + ": bad magic, expected \"" + magic + "\"");
  }
}

inline std::ofstream OpenForWrite(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) Fail(ErrorKind::kIo, "cannot open " + path + " for writing");
  return os;
}

inline std::ifstream OpenForRead(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) Fail(ErrorKind::kIo, "cannot open " + path);
  return is;
}

// 64-bit FNV-1a, used for fingerprints and parameter hashing.
class Fnv1a {
 public:
  void Update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void Update(const std::string& s) { Update(s.data(), s.size()); }
  std::uint64_t Digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string Hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace addi::io
