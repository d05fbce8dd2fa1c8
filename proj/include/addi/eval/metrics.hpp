// addi/eval/metrics.hpp

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
#include <map>
#include <vector>

#include "addi/common/error.hpp"

namespace addi::eval {

// Recall of every class that occurs in `labels`, keyed by class.
inline std::map<int, double> PerClassRecall(const std::vector<int>& predictions,
                                            const std::vector<int>& labels) {
  Require(!labels.empty(), ErrorKind::kInvalidInput, "recall of an empty label set");
  Require(predictions.size() == labels.size(), ErrorKind::kDimension,
          "predictions and labels differ in length");
  std::map<int, std::pair<std::size_t, std::size_t>> hits;  // class -> (correct, total)
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& h = hits[labels[i]];
    ++h.second;
    if (predictions[i] == labels[i]) ++h.first;
  }
  std::map<int, double> out;
  for (const auto& [c, h] : hits) out[c] = double(h.first) / double(h.second);
  return out;
}

// Unweighted average recall over the classes present in `labels`.
inline double Uar(const std::vector<int>& predictions, const std::vector<int>& labels) {
  const auto recalls = PerClassRecall(predictions, labels);
  double s = 0.0;
  for (const auto& [c, r] : recalls) s += r;
  return s / double(recalls.size());
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single value
};

inline MeanStd Summarize(const std::vector<double>& values) {
  Require(!values.empty(), ErrorKind::kInvalidInput, "cannot summarize an empty list");
  MeanStd m;
  for (double v : values) m.mean += v;
  m.mean /= double(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(ss / double(values.size() - 1));
  }
  return m;
}

}  // namespace addi::eval
