// addi/data/split.hpp

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
#include <cmath>
#include <cstdint>
#include <map>
#include <type_traits>
#include <utility>
#include <vector>

#include "addi/common/rng.hpp"
#include "addi/data/manifest.hpp"

namespace addi::data {

// Stratum of an item: its class index, or -1 when unlabelled.
inline int StratumOf(const UtteranceRecord& r) { return r.label ? r.label->value : -1; }
inline int StratumOf(const Utterance& u) { return StratumOf(u.record); }

// Largest-remainder apportionment of `total` across groups in proportion to
// their sizes. Ties go to the earlier group.
inline std::vector<std::size_t> Apportion(const std::vector<std::size_t>& sizes,
                                          std::size_t total) {
  std::size_t n = 0;
  for (auto s : sizes) n += s;
  std::vector<std::size_t> quota(sizes.size(), 0);
  if (n == 0) return quota;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    const double ideal = static_cast<double>(total) * static_cast<double>(sizes[g]) /
                         static_cast<double>(n);
    quota[g] = static_cast<std::size_t>(std::floor(ideal));
    assigned += quota[g];
    remainders.emplace_back(ideal - std::floor(ideal), g);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i) {
    if (quota[remainders[i].second] < sizes[remainders[i].second]) {
      ++quota[remainders[i].second];
      ++assigned;
    }
  }
  return quota;
}

// Reproducible split of `items` into (first, second) with
// round(ratio * n) items in the first part. Stratified by class unless
// `stratified` is false. Both parts keep the input order.
template <typename Item>
std::pair<std::vector<Item>, std::vector<Item>> SplitSource(const std::vector<Item>& items,
                                                            double ratio, std::uint64_t seed,
                                                            std::size_t n_classes,
                                                            bool stratified = true) {
  Require(ratio >= 0.0 && ratio <= 1.0, ErrorKind::kInvalidInput,
          "split ratio must lie in [0, 1]");
  Require(items.size() >= n_classes, ErrorKind::kInvalidInput,
          "cannot split " + std::to_string(items.size()) + " records over " +
              std::to_string(n_classes) + " classes");
  Rng rng(seed);
  const std::size_t n_first =
      static_cast<std::size_t>(std::llround(ratio * static_cast<double>(items.size())));

  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < items.size(); ++i) {
    strata[stratified ? StratumOf(items[i]) : 0].push_back(i);
  }
  std::vector<std::size_t> sizes;
  for (auto& [key, idx] : strata) {
    rng.Shuffle(idx);
    sizes.push_back(idx.size());
  }
  const auto quota = Apportion(sizes, n_first);
  std::vector<bool> in_first(items.size(), false);
  std::size_t g = 0;
  for (auto& [key, idx] : strata) {
    for (std::size_t k = 0; k < quota[g]; ++k) in_first[idx[k]] = true;
    ++g;
  }
  std::pair<std::vector<Item>, std::vector<Item>> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    (in_first[i] ? out.first : out.second).push_back(items[i]);
  }
  return out;
}

// Keeps round(fraction * n) items, stratified, in input order.
template <typename Item>
std::vector<Item> Subsample(const std::vector<Item>& items, double fraction, std::uint64_t seed) {
  Require(fraction >= 0.0 && fraction <= 1.0, ErrorKind::kInvalidInput,
          "fraction must lie in [0, 1]");
  if (fraction == 1.0) return items;
  return SplitSource(items, fraction, seed, 0, true).first;
}

// Uniform pseudo-labels: shuffle under `seed`, then deal classes round-robin,
// so class counts differ by at most one.
template <typename Item>
std::vector<Item> AssignPseudoLabels(std::vector<Item> pool, int n_classes, std::uint64_t seed) {
  Require(!pool.empty(), ErrorKind::kInvalidInput, "cannot pseudo-label an empty pool");
  Require(n_classes >= 1, ErrorKind::kInvalidInput, "need at least one pseudo class");
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.Shuffle(order);
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto& item = pool[order[k]];
    UtteranceRecord& rec = [&]() -> UtteranceRecord& {
      if constexpr (std::is_same_v<Item, Utterance>) {
        return item.record;
      } else {
        return item;
      }
    }();
    rec.pseudo_label = static_cast<int>(k % static_cast<std::size_t>(n_classes));
  }
  return pool;
}

}  // namespace addi::data
