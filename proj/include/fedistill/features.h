// Copyright 2026 The fedistill Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDISTILL_FEATURES_H_
#define FEDISTILL_FEATURES_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fedistill/corpus.h"

namespace fedistill {

enum class VocabularyMode { kPublicOnly, kHashed };

VocabularyMode ParseVocabularyMode(std::string_view name);
std::string_view VocabularyModeName(VocabularyMode mode);

// Token -> feature index map plus the public-corpus document frequencies
// needed for idf weighting.
//
// A public-only vocabulary keeps the `max_features` tokens with the highest
// public document frequency (ties broken lexicographically), so it is a pure
// function of the public corpus. A hashed vocabulary maps every token to
// FNV-1a(token) mod `max_features` and needs no shared token list.
class Vocabulary {
 public:
  static Vocabulary Build(const Corpus& public_corpus, std::size_t max_features,
                          VocabularyMode mode);

  std::optional<std::uint32_t> Lookup(std::string_view token) const;
  std::size_t size() const { return size_; }
  VocabularyMode mode() const { return mode_; }
  // Index order; empty for hashed vocabularies.
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool has_document_frequencies() const { return document_count_ > 0; }
  std::size_t document_count() const { return document_count_; }
  const std::vector<std::size_t>& document_frequencies() const { return df_; }
  // Recomputes df statistics from `public_corpus`.
  void AttachDocumentFrequencies(const Corpus& public_corpus);

  // One token per line, line number = index. Only public-only vocabularies
  // can be saved. A loaded vocabulary carries no df statistics.
  void Save(const std::filesystem::path& path) const;
  static Vocabulary Load(const std::filesystem::path& path);

 private:
  VocabularyMode mode_ = VocabularyMode::kPublicOnly;
  std::size_t size_ = 0;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::size_t document_count_ = 0;
  std::vector<std::size_t> df_;
};

// Compressed sparse rows. Column indices are strictly increasing within a
// row; `labels` is aligned with the rows.
struct FeatureMatrix {
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> col_idx;
  std::vector<double> values;
  std::vector<std::optional<int>> labels;

  std::size_t rows() const { return row_ptr.size() - 1; }
  std::span<const std::uint32_t> row_indices(std::size_t r) const {
    return {col_idx.data() + row_ptr[r], row_ptr[r + 1] - row_ptr[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values.data() + row_ptr[r], row_ptr[r + 1] - row_ptr[r]};
  }
  bool fully_labeled() const;
  // Labels as plain ints; throws if any row is unlabeled.
  std::vector<int> DenseLabels() const;

  FeatureMatrix SelectRows(std::span<const std::size_t> rows) const;
  FeatureMatrix WithoutLabels() const;
  // Concatenates row blocks with identical column counts.
  static FeatureMatrix Stack(std::span<const FeatureMatrix> blocks);

  bool operator==(const FeatureMatrix&) const = default;
};

enum class WeightingScheme { kCounts, kTfidf };

WeightingScheme ParseWeightingScheme(std::string_view name);
std::string_view WeightingSchemeName(WeightingScheme scheme);

// Bag-of-words rows in corpus order. Out-of-vocabulary tokens are dropped.
// Tf-idf uses idf = ln(N / df) with N and df from the public corpus the
// vocabulary was built on; a bucket never seen in public data gets
// idf = ln(N). With `l2_normalize`, nonzero rows are scaled to unit norm.
FeatureMatrix Featurize(const Corpus& corpus, const Vocabulary& vocab,
                        WeightingScheme scheme, bool l2_normalize = false);

// How an experiment turns text into features.
struct FeatureOptions {
  std::size_t max_features = 5000;
  VocabularyMode mode = VocabularyMode::kPublicOnly;
  WeightingScheme scheme = WeightingScheme::kTfidf;
  bool l2_normalize = true;

  bool operator==(const FeatureOptions&) const = default;
};

}  // namespace fedistill

#endif  // FEDISTILL_FEATURES_H_
