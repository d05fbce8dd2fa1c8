// addi/data/batches.hpp

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
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "addi/autodiff/tensor.hpp"
#include "addi/common/rng.hpp"
#include "addi/data/manifest.hpp"

namespace addi::data {

// Fixed-size one-hot language codes appended to the classifier input.
class LanguageVocabulary {
 public:
  LanguageVocabulary() = default;
  explicit LanguageVocabulary(std::vector<std::string> languages)
      : languages_(std::move(languages)) {
    std::set<std::string> seen;
    for (const auto& l : languages_) {
      Require(seen.insert(l).second, ErrorKind::kConfig, "duplicate language " + l);
    }
  }

  std::size_t size() const { return languages_.size(); }
  const std::vector<std::string>& languages() const { return languages_; }

  std::vector<float> OneHot(const std::optional<std::string>& language) const {
    Require(language.has_value(), ErrorKind::kSchema,
            "record has no language but language ids are enabled");
    auto it = std::find(languages_.begin(), languages_.end(), *language);
    Require(it != languages_.end(), ErrorKind::kSchema, "unknown language \"" + *language + "\"");
    std::vector<float> code(languages_.size(), 0.0f);
    code[static_cast<std::size_t>(it - languages_.begin())] = 1.0f;
    return code;
  }

 private:
  std::vector<std::string> languages_;
};

// Validates that every record's language is in the vocabulary and returns the
// per-record one-hot codes.
inline std::vector<std::vector<float>> AttachLanguageId(const std::vector<UtteranceRecord>& records,
                                                        const LanguageVocabulary& vocabulary) {
  std::vector<std::vector<float>> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(vocabulary.OneHot(r.language));
  return out;
}

struct DomainBatch {
  ad::Tensor<float> features;  // B x 1 x n_mels x T
  std::vector<int> domains;
  std::vector<std::optional<int>> labels;
  std::vector<std::string> ids;
  ad::Tensor<float> language_codes;  // B x V, or empty

  std::size_t size() const { return domains.size(); }

  // B x 2, [1, 0] for d = 0 and [0, 1] for d = 1.
  ad::Tensor<float> DomainCodes() const {
    ad::Tensor<float> codes({size(), 2});
    for (std::size_t i = 0; i < size(); ++i) codes[i * 2 + static_cast<std::size_t>(domains[i])] = 1.0f;
    return codes;
  }

  std::vector<std::size_t> RowsWithDomain(int d) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < size(); ++i) {
      if (domains[i] == d) rows.push_back(i);
    }
    return rows;
  }

  std::vector<std::size_t> LabelledRows() const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < size(); ++i) {
      if (labels[i]) rows.push_back(i);
    }
    return rows;
  }

  std::size_t frame_size() const { return features.size() / std::max<std::size_t>(size(), 1); }
};

// Copies the given rows of a batch-major tensor (any rank, first axis is the
// batch axis) into a new tensor, converting the element type.
template <typename T, typename U>
ad::Tensor<T> SelectRows(const ad::Tensor<U>& src, const std::vector<std::size_t>& rows) {
  ad::Shape shape = src.shape();
  const std::size_t stride = src.dim(0) == 0 ? 0 : src.size() / src.dim(0);
  shape[0] = rows.size();
  ad::Tensor<T> out(shape);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t j = 0; j < stride; ++j) {
      out[k * stride + j] = static_cast<T>(src[rows[k] * stride + j]);
    }
  }
  return out;
}

// Assembles a batch from utterances; `domains[i]` and `expose[i]` give the
// domain code and label visibility of row i.
inline DomainBatch AssembleBatch(const std::vector<const Utterance*>& rows,
                                 const std::vector<int>& domains, const std::vector<bool>& expose,
                                 const LanguageVocabulary* vocabulary = nullptr) {
  Require(!rows.empty(), ErrorKind::kInvalidInput, "empty batch");
  const auto& first = *rows.front()->features;
  DomainBatch b;
  b.features = ad::Tensor<float>({rows.size(), 1, first.n_mels, first.n_frames});
  const std::size_t stride = first.n_mels * first.n_frames;
  if (vocabulary && vocabulary->size() > 0) {
    b.language_codes = ad::Tensor<float>({rows.size(), vocabulary->size()});
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& f = *rows[i]->features;
    Require(f.n_mels == first.n_mels && f.n_frames == first.n_frames, ErrorKind::kDimension,
            "utterance " + rows[i]->record.id + " is " + std::to_string(f.n_mels) + "x" +
                std::to_string(f.n_frames) + ", batch expects " + std::to_string(first.n_mels) +
                "x" + std::to_string(first.n_frames) + "; pad the set to a common length");
    std::copy(f.values.begin(), f.values.end(), b.features.data() + i * stride);
    b.domains.push_back(domains[i]);
    const auto& rec = rows[i]->record;
    b.labels.push_back(expose[i] && rec.label ? std::optional<int>(rec.label->value) : std::nullopt);
    b.ids.push_back(rec.id);
    if (!b.language_codes.empty()) {
      auto code = vocabulary->OneHot(rec.language);
      std::copy(code.begin(), code.end(), b.language_codes.data() + i * vocabulary->size());
    }
  }
  return b;
}

// Single-consumer stream of mixed-domain batches. Each batch takes half its
// rows from each domain. An epoch visits every item of the larger domain
// exactly once; the smaller domain is recycled, reshuffling whenever it runs
// out. Source labels are always visible; a fixed, seed-chosen
// `target_label_fraction` of the target items expose theirs.
class BatchStream {
 public:
  BatchStream(const std::vector<Utterance>& source, const std::vector<Utterance>& target,
              std::size_t batch_size, std::uint64_t seed, double target_label_fraction,
              const LanguageVocabulary* vocabulary = nullptr)
      : source_(source),
        target_(target),
        batch_size_(batch_size),
        rng_(seed),
        vocabulary_(vocabulary) {
    Require(batch_size >= 2, ErrorKind::kInvalidInput, "batch size must be at least 2");
    Require(target_label_fraction >= 0.0 && target_label_fraction <= 1.0,
            ErrorKind::kInvalidInput, "target label fraction must lie in [0, 1]");
    Require(!source.empty() || !target.empty(), ErrorKind::kInvalidInput,
            "both domains are empty");
    target_exposed_.assign(target.size(), false);
    std::vector<std::size_t> order(target.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng_.Shuffle(order);
    const auto n_exposed = static_cast<std::size_t>(
        std::llround(target_label_fraction * static_cast<double>(target.size())));
    for (std::size_t k = 0; k < n_exposed; ++k) target_exposed_[order[k]] = true;
    StartEpoch();
  }

  std::size_t BatchesPerEpoch() const {
    const std::size_t larger = std::max(source_.size(), target_.size());
    const std::size_t per = RowsPerDomain();
    return (larger + per - 1) / per;
  }

  void StartEpoch() {
    larger_is_source_ = source_.size() >= target_.size();
    larger_order_ = Permutation(larger().size());
    larger_pos_ = 0;
    if (smaller_order_.empty() && !smaller().empty()) {
      smaller_order_ = Permutation(smaller().size());
      smaller_pos_ = 0;
    }
  }

  // Fills `out` with the next batch; false once the epoch is exhausted
  // (call StartEpoch to begin the next one).
  bool Next(DomainBatch& out) {
    if (larger_pos_ >= larger_order_.size()) return false;
    const std::size_t m = std::min(RowsPerDomain(), larger_order_.size() - larger_pos_);
    std::vector<const Utterance*> rows;
    std::vector<int> domains;
    std::vector<bool> expose;
    auto push = [&](bool from_source, std::size_t idx) {
      rows.push_back(from_source ? &source_[idx] : &target_[idx]);
      domains.push_back(from_source ? 0 : 1);
      expose.push_back(from_source ? true : target_exposed_[idx]);
    };
    std::vector<std::size_t> large_idx(larger_order_.begin() + static_cast<std::ptrdiff_t>(larger_pos_),
                                       larger_order_.begin() + static_cast<std::ptrdiff_t>(larger_pos_ + m));
    larger_pos_ += m;
    std::vector<std::size_t> small_idx;
    if (!smaller().empty()) {
      for (std::size_t k = 0; k < m; ++k) {
        if (smaller_pos_ >= smaller_order_.size()) {
          smaller_order_ = Permutation(smaller().size());
          smaller_pos_ = 0;
        }
        small_idx.push_back(smaller_order_[smaller_pos_++]);
      }
    }
    const auto& src_idx = larger_is_source_ ? large_idx : small_idx;
    const auto& tgt_idx = larger_is_source_ ? small_idx : large_idx;
    for (auto i : src_idx) push(true, i);
    for (auto i : tgt_idx) push(false, i);
    out = AssembleBatch(rows, domains, expose, vocabulary_);
    return true;
  }

  bool target_label_exposed(std::size_t target_index) const {
    return target_exposed_.at(target_index);
  }

 private:
  std::size_t RowsPerDomain() const {
    return (source_.empty() || target_.empty()) ? batch_size_ : batch_size_ / 2;
  }
  const std::vector<Utterance>& larger() const { return larger_is_source_ ? source_ : target_; }
  const std::vector<Utterance>& smaller() const { return larger_is_source_ ? target_ : source_; }

  std::vector<std::size_t> Permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    rng_.Shuffle(p);
    return p;
  }

  const std::vector<Utterance>& source_;
  const std::vector<Utterance>& target_;
  std::size_t batch_size_;
  Rng rng_;
  const LanguageVocabulary* vocabulary_;
  std::vector<bool> target_exposed_;
  bool larger_is_source_ = true;
  std::vector<std::size_t> larger_order_, smaller_order_;
  std::size_t larger_pos_ = 0, smaller_pos_ = 0;
};

}  // namespace addi::data
