// addi/data/labels.hpp

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

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "addi/common/error.hpp"

namespace addi::data {

// Retained categorical classes, in class-index order.
enum class Emotion { kHappy = 0, kSad = 1, kNeutral = 2, kAngry = 3 };
inline constexpr int kNumEmotions = 4;

inline constexpr std::array<std::string_view, 4> kEmotionNames = {"happy", "sad", "neutral",
                                                                  "angry"};

enum class LabelKind { kCategorical4, kBinaryArousal, kBinaryValence };

inline std::string_view LabelKindName(LabelKind k) {
  switch (k) {
    case LabelKind::kCategorical4: return "categorical4";
    case LabelKind::kBinaryArousal: return "binary_arousal";
    case LabelKind::kBinaryValence: return "binary_valence";
  }
  return "?";
}

inline LabelKind ParseLabelKind(std::string_view s) {
  if (s == "categorical4" || s == "categorical") return LabelKind::kCategorical4;
  if (s == "binary_arousal" || s == "arousal") return LabelKind::kBinaryArousal;
  if (s == "binary_valence" || s == "valence") return LabelKind::kBinaryValence;
  Fail(ErrorKind::kSchema, "unknown label kind \"" + std::string(s) + "\"");
}

inline int NumClasses(LabelKind k) { return k == LabelKind::kCategorical4 ? kNumEmotions : 2; }

inline std::string ClassName(LabelKind k, int value) {
  if (k == LabelKind::kCategorical4) return std::string(kEmotionNames.at(static_cast<std::size_t>(value)));
  if (k == LabelKind::kBinaryArousal) return value == 0 ? "low" : "high";
  return value == 0 ? "negative" : "positive";
}

// A normalized label: class index within its scheme.
struct Label {
  LabelKind kind = LabelKind::kCategorical4;
  int value = 0;

  friend bool operator==(const Label&, const Label&) = default;
};

// Annotation ranges of the dimensional corpora.
enum class DimensionalScale { kIemocap, kRecola };

inline std::optional<DimensionalScale> ScaleForCorpus(std::string_view corpus_id) {
  std::string c(corpus_id);
  std::transform(c.begin(), c.end(), c.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (c.rfind("iemocap", 0) == 0) return DimensionalScale::kIemocap;
  if (c.rfind("recola", 0) == 0) return DimensionalScale::kRecola;
  return std::nullopt;
}

// IEMOCAP [1, 2.5] -> 0, (2.5, 5] -> 1; RECOLA [-1, 0] -> 0, (0, 1] -> 1.
inline int MapDimensional(double value, DimensionalScale scale) {
  const double lo = scale == DimensionalScale::kIemocap ? 1.0 : -1.0;
  const double hi = scale == DimensionalScale::kIemocap ? 5.0 : 1.0;
  const double split = scale == DimensionalScale::kIemocap ? 2.5 : 0.0;
  Require(std::isfinite(value) && value >= lo && value <= hi, ErrorKind::kInvalidInput,
          "dimensional value " + std::to_string(value) + " outside annotation range [" +
              std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return value <= split ? 0 : 1;
}

// Result of normalizing a raw categorical token: a retained class, or a known
// emotion that this study does not use.
struct CategoricalResult {
  std::optional<Emotion> emotion;
  bool filtered() const { return !emotion.has_value(); }
};

// "excited" merges into happy; the four retained classes pass through; the
// remaining known emotions are filtered. Unknown tokens are a schema error.
inline CategoricalResult NormalizeCategorical(std::string_view raw) {
  std::string s(raw);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (s == "happy" || s == "hap" || s == "happiness" || s == "excited" || s == "exc") {
    return {Emotion::kHappy};
  }
  if (s == "sad" || s == "sadness") return {Emotion::kSad};
  if (s == "neutral" || s == "neu") return {Emotion::kNeutral};
  if (s == "angry" || s == "ang" || s == "anger") return {Emotion::kAngry};
  static constexpr std::array<std::string_view, 14> kFiltered = {
      "disgust", "dis", "frustrated", "frustration", "fru", "fearful", "fear", "fea",
      "surprised", "surprise", "sur", "other", "oth", "boredom"};
  if (std::find(kFiltered.begin(), kFiltered.end(), s) != kFiltered.end()) return {};
  Fail(ErrorKind::kSchema, "unknown emotion label \"" + std::string(raw) + "\"");
}

}  // namespace addi::data
