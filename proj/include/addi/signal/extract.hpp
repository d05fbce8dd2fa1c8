// addi/signal/extract.hpp

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

// Cached feature extraction over an audio manifest. The input manifest's
// feature_path column names WAV files; the output manifest is the same record
// list pointing at feature caches instead. A cache file is named after a hash
// of the audio bytes and the front-end options, so an unchanged input is never
// recomputed and reruns leave every output byte unchanged.

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>

#include "addi/common/binary_io.hpp"
#include "addi/data/manifest.hpp"
#include "addi/signal/feature_cache.hpp"
#include "addi/signal/features.hpp"
#include "addi/signal/wav.hpp"

namespace addi::signal {

inline std::string FbankOptionsKey(const FbankOptions& o) {
  std::ostringstream os;
  os.precision(17);
  os << "fbank/v" << kFeatureCacheVersion << ' ' << o.frame.frame_length_ms << ' '
     << o.frame.frame_shift_ms << ' ' << o.frame.preemph_coeff << ' ' << o.frame.remove_dc_offset
     << ' ' << o.mel.n_mels << ' ' << o.mel.low_cutoff_hz << ' ' << o.mel.high_cutoff_hz << ' '
     << o.mel.energy_floor;
  return os.str();
}

// Cache file name for the audio at `path` under `opts`.
inline std::string CacheName(const std::string& path, const FbankOptions& opts) {
  std::ifstream is(path, std::ios::binary);
  Require(static_cast<bool>(is), ErrorKind::kIo, "cannot read " + path);
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  io::Fnv1a h;
  h.Update(FbankOptionsKey(opts));
  h.Update(bytes);
  return io::Hex64(h.Digest()) + ".fb";
}

struct ExtractSummary {
  std::size_t computed = 0;
  std::size_t reused = 0;
  std::vector<data::UtteranceRecord> records;
};

// Extracts every record of `manifest` into `cache_dir` and writes the feature
// manifest to `out_manifest`. `log` receives one line per reused cache entry.
inline ExtractSummary ExtractManifest(const std::string& manifest, const std::string& cache_dir,
                                      const std::string& out_manifest,
                                      const FbankOptions& opts = {},
                                      const std::function<void(const std::string&)>& log = {}) {
  const auto corpus = data::LoadManifest(manifest);
  const auto base = std::filesystem::path(manifest).parent_path();
  std::filesystem::create_directories(cache_dir);
  ExtractSummary out;
  for (auto r : corpus.records) {
    Require(!r.feature_path.empty(), ErrorKind::kData, "record " + r.id + " has no audio path");
    std::filesystem::path audio(r.feature_path);
    if (audio.is_relative()) audio = base / audio;
    const auto cache = std::filesystem::path(cache_dir) / CacheName(audio.string(), opts);
    if (std::filesystem::exists(cache)) {
      ++out.reused;
      if (log) log("skip " + r.id + ": cached at " + cache.string());
    } else {
      const auto tmp = cache.string() + ".tmp";
      WriteFeatureCache(tmp, ComputeFbank(ReadWav(audio.string()), opts));
      std::filesystem::rename(tmp, cache);
      ++out.computed;
    }
    r.feature_path = std::filesystem::absolute(cache).lexically_normal().string();
    out.records.push_back(std::move(r));
  }
  data::WriteManifest(out_manifest, out.records);
  return out;
}

}  // namespace addi::signal
