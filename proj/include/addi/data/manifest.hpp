// addi/data/manifest.hpp

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

// Manifest files: UTF-8 text, one utterance per line, seven tab-separated
// fields
//
//   id  feature_path  corpus_id  domain  label_kind  label_value  language
//
// "∅" marks an absent field. Blank lines and lines starting with '#' are
// skipped. label_kind is one of categorical4 | binary_arousal |
// binary_valence (short forms categorical | arousal | valence accepted).
// Dimensional values are either already binary (low/high, negative/positive,
// 0/1 for corpora without a known scale) or raw annotations mapped through the
// corpus scale.

#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "addi/data/labels.hpp"
#include "addi/signal/feature_cache.hpp"

namespace addi::data {

inline const std::string kAbsent = "\xE2\x88\x85";  // U+2205

struct UtteranceRecord {
  std::string id;
  std::string feature_path;
  std::string corpus_id;
  int domain = 0;  // 0 source, 1 target
  std::optional<Label> label;
  std::optional<int> pseudo_label;
  std::optional<std::string> language;

  friend bool operator==(const UtteranceRecord&, const UtteranceRecord&) = default;
};

struct Corpus {
  std::vector<UtteranceRecord> records;
  std::vector<std::string> warnings;
  std::size_t filtered = 0;
};

namespace detail {

inline std::vector<std::string> SplitTabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

inline std::optional<double> ParseNumber(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

inline std::optional<int> ParseBinaryToken(const std::string& s) {
  if (s == "low" || s == "negative") return 0;
  if (s == "high" || s == "positive") return 1;
  return std::nullopt;
}

}  // namespace detail

// Parses one manifest line. Returns nullopt for rows whose categorical label
// is a known but unretained emotion.
inline std::optional<UtteranceRecord> ParseManifestLine(const std::string& line,
                                                        std::size_t line_no) {
  const auto where = "manifest line " + std::to_string(line_no) + ": ";
  auto fields = detail::SplitTabs(line);
  Require(fields.size() == 7, ErrorKind::kParse,
          where + "expected 7 tab-separated fields, found " + std::to_string(fields.size()));
  auto absent = [](const std::string& s) { return s == kAbsent || s.empty(); };
  UtteranceRecord r;
  Require(!absent(fields[0]), ErrorKind::kParse, where + "missing id");
  r.id = fields[0];
  r.feature_path = absent(fields[1]) ? "" : fields[1];
  r.corpus_id = absent(fields[2]) ? "" : fields[2];
  if (fields[3] == "0") {
    r.domain = 0;
  } else if (fields[3] == "1") {
    r.domain = 1;
  } else {
    Fail(ErrorKind::kSchema, where + "domain must be 0 or 1, got \"" + fields[3] + "\"");
  }
  const bool has_kind = !absent(fields[4]);
  const bool has_value = !absent(fields[5]);
  Require(has_kind == has_value, ErrorKind::kSchema,
          where + "label_kind and label_value must both be present or both absent");
  if (has_kind) {
    LabelKind kind;
    try {
      kind = ParseLabelKind(fields[4]);
    } catch (const Error& e) {
      Fail(ErrorKind::kSchema, where + e.what());
    }
    const std::string& v = fields[5];
    if (kind == LabelKind::kCategorical4) {
      CategoricalResult c;
      try {
        c = NormalizeCategorical(v);
      } catch (const Error& e) {
        Fail(ErrorKind::kSchema, where + e.what());
      }
      if (c.filtered()) return std::nullopt;
      r.label = Label{kind, static_cast<int>(*c.emotion)};
    } else if (auto b = detail::ParseBinaryToken(v)) {
      r.label = Label{kind, *b};
    } else if (auto num = detail::ParseNumber(v)) {
      if (auto scale = ScaleForCorpus(r.corpus_id)) {
        try {
          r.label = Label{kind, MapDimensional(*num, *scale)};
        } catch (const Error& e) {
          Fail(ErrorKind::kSchema, where + e.what());
        }
      } else if (*num == 0.0 || *num == 1.0) {
        r.label = Label{kind, static_cast<int>(*num)};
      } else {
        Fail(ErrorKind::kSchema, where + "no dimensional scale known for corpus \"" +
                                     r.corpus_id + "\"; provide binary labels");
      }
    } else {
      Fail(ErrorKind::kSchema, where + "unknown label token \"" + v + "\"");
    }
  }
  if (!absent(fields[6])) r.language = fields[6];
  return r;
}

inline Corpus ParseManifest(std::istream& is, const std::string& name = "manifest") {
  Corpus corpus;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto rec = ParseManifestLine(line, line_no);
    if (!rec) {
      ++corpus.filtered;
      continue;
    }
    Require(ids.insert(rec->id).second, ErrorKind::kSchema,
            "manifest line " + std::to_string(line_no) + ": duplicate id \"" + rec->id + "\"");
    corpus.records.push_back(std::move(*rec));
  }
  if (corpus.records.empty()) corpus.warnings.push_back(name + " contains no records");
  if (corpus.filtered > 0) {
    corpus.warnings.push_back(name + ": " + std::to_string(corpus.filtered) +
                              " rows with unretained emotions filtered");
  }
  return corpus;
}

inline Corpus LoadManifest(const std::string& path) {
  std::ifstream is(path);
  Require(static_cast<bool>(is), ErrorKind::kIo, "cannot open manifest " + path);
  return ParseManifest(is, path);
}

inline std::string FormatManifestLine(const UtteranceRecord& r) {
  auto field = [](const std::string& s) { return s.empty() ? kAbsent : s; };
  std::string kind = kAbsent, value = kAbsent;
  if (r.label) {
    kind = std::string(LabelKindName(r.label->kind));
    value = ClassName(r.label->kind, r.label->value);
  }
  return r.id + '\t' + field(r.feature_path) + '\t' + field(r.corpus_id) + '\t' +
         std::to_string(r.domain) + '\t' + kind + '\t' + value + '\t' +
         (r.language ? field(*r.language) : kAbsent);
}

inline void WriteManifest(const std::string& path, const std::vector<UtteranceRecord>& records) {
  std::ofstream os(path, std::ios::trunc);
  Require(static_cast<bool>(os), ErrorKind::kIo, "cannot write manifest " + path);
  for (const auto& r : records) os << FormatManifestLine(r) << '\n';
  Require(static_cast<bool>(os), ErrorKind::kIo, "write failed for " + path);
}

// A record together with its (shared, immutable) feature matrix.
struct Utterance {
  UtteranceRecord record;
  std::shared_ptr<const signal::FeatureMatrix> features;
};

// Reads every record's feature cache. Relative paths resolve against
// `base_dir` when it is non-empty.
inline std::vector<Utterance> LoadFeatures(const std::vector<UtteranceRecord>& records,
                                           const std::string& base_dir = "") {
  std::vector<Utterance> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    Require(!r.feature_path.empty(), ErrorKind::kData, "record " + r.id + " has no feature path");
    std::string path = r.feature_path;
    if (!base_dir.empty() && path.front() != '/') path = base_dir + "/" + path;
    out.push_back(Utterance{r, std::make_shared<const signal::FeatureMatrix>(
                                   signal::ReadFeatureCache(path))});
  }
  return out;
}

}  // namespace addi::data
