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

#include "fedistill/features.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>

namespace fedistill {
namespace {

std::uint64_t Fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

VocabularyMode ParseVocabularyMode(std::string_view name) {
  if (name == "public_only") return VocabularyMode::kPublicOnly;
  if (name == "hashed") return VocabularyMode::kHashed;
  throw std::invalid_argument("unknown vocabulary mode '" + std::string(name) + "'");
}

std::string_view VocabularyModeName(VocabularyMode mode) {
  return mode == VocabularyMode::kPublicOnly ? "public_only" : "hashed";
}

WeightingScheme ParseWeightingScheme(std::string_view name) {
  if (name == "counts") return WeightingScheme::kCounts;
  if (name == "tfidf") return WeightingScheme::kTfidf;
  throw std::invalid_argument("unknown weighting scheme '" + std::string(name) + "'");
}

std::string_view WeightingSchemeName(WeightingScheme scheme) {
  return scheme == WeightingScheme::kCounts ? "counts" : "tfidf";
}

Vocabulary Vocabulary::Build(const Corpus& public_corpus,
                             std::size_t max_features, VocabularyMode mode) {
  if (max_features == 0) throw std::invalid_argument("max_features must be positive");
  Vocabulary vocab;
  vocab.mode_ = mode;
  if (mode == VocabularyMode::kHashed) {
    vocab.size_ = max_features;
    if (!public_corpus.empty()) vocab.AttachDocumentFrequencies(public_corpus);
    return vocab;
  }
  if (public_corpus.empty()) {
    throw std::invalid_argument("public-only vocabulary needs a non-empty public corpus");
  }
  std::map<std::string, std::size_t> df;
  for (const auto& ex : public_corpus.examples()) {
    auto toks = Tokenize(ex.text);
    std::set<std::string> unique(toks.begin(), toks.end());
    for (const auto& t : unique) ++df[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(df.begin(), df.end());
  // std::map iteration is lexicographic, so a stable sort on df keeps ties in
  // lexicographic order.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_features) ranked.resize(max_features);
  for (auto& [tok, count] : ranked) {
    vocab.index_.emplace(tok, static_cast<std::uint32_t>(vocab.tokens_.size()));
    vocab.tokens_.push_back(tok);
  }
  vocab.size_ = vocab.tokens_.size();
  vocab.AttachDocumentFrequencies(public_corpus);
  return vocab;
}

std::optional<std::uint32_t> Vocabulary::Lookup(std::string_view token) const {
  if (mode_ == VocabularyMode::kHashed) {
    return static_cast<std::uint32_t>(Fnv1a(token) % size_);
  }
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Vocabulary::AttachDocumentFrequencies(const Corpus& public_corpus) {
  df_.assign(size_, 0);
  document_count_ = public_corpus.size();
  for (const auto& ex : public_corpus.examples()) {
    std::set<std::uint32_t> seen;
    for (const auto& t : Tokenize(ex.text)) {
      if (auto idx = Lookup(t)) seen.insert(*idx);
    }
    for (auto idx : seen) ++df_[idx];
  }
}

void Vocabulary::Save(const std::filesystem::path& path) const {
  if (mode_ != VocabularyMode::kPublicOnly) {
    throw std::logic_error("hashed vocabularies have no token list to save");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  Vocabulary vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!vocab.index_.emplace(line, static_cast<std::uint32_t>(vocab.tokens_.size())).second) {
      throw std::runtime_error("duplicate token '" + line + "' in " + path.string());
    }
    vocab.tokens_.push_back(line);
  }
  vocab.size_ = vocab.tokens_.size();
  return vocab;
}

bool FeatureMatrix::fully_labeled() const {
  return std::all_of(labels.begin(), labels.end(),
                     [](const auto& l) { return l.has_value(); });
}

std::vector<int> FeatureMatrix::DenseLabels() const {
  std::vector<int> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) throw std::invalid_argument("row " + std::to_string(i) + " is unlabeled");
    out.push_back(*labels[i]);
  }
  return out;
}

FeatureMatrix FeatureMatrix::SelectRows(std::span<const std::size_t> rows) const {
  FeatureMatrix out;
  out.cols = cols;
  for (std::size_t r : rows) {
    if (r >= this->rows()) throw std::out_of_range("FeatureMatrix::SelectRows");
    auto idx = row_indices(r);
    auto val = row_values(r);
    out.col_idx.insert(out.col_idx.end(), idx.begin(), idx.end());
    out.values.insert(out.values.end(), val.begin(), val.end());
    out.row_ptr.push_back(out.col_idx.size());
    out.labels.push_back(labels[r]);
  }
  return out;
}

FeatureMatrix FeatureMatrix::WithoutLabels() const {
  FeatureMatrix out = *this;
  for (auto& l : out.labels) l.reset();
  return out;
}

FeatureMatrix FeatureMatrix::Stack(std::span<const FeatureMatrix> blocks) {
  FeatureMatrix out;
  if (blocks.empty()) return out;
  out.cols = blocks.front().cols;
  for (const auto& b : blocks) {
    if (b.cols != out.cols) throw std::invalid_argument("FeatureMatrix::Stack: column mismatch");
    const std::size_t base = out.col_idx.size();
    out.col_idx.insert(out.col_idx.end(), b.col_idx.begin(), b.col_idx.end());
    out.values.insert(out.values.end(), b.values.begin(), b.values.end());
    for (std::size_t r = 1; r < b.row_ptr.size(); ++r) out.row_ptr.push_back(base + b.row_ptr[r]);
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  }
  return out;
}

FeatureMatrix Featurize(const Corpus& corpus, const Vocabulary& vocab,
                        WeightingScheme scheme, bool l2_normalize) {
  if (vocab.size() == 0) throw std::invalid_argument("empty vocabulary");
  std::vector<double> idf;
  if (scheme == WeightingScheme::kTfidf) {
    if (!vocab.has_document_frequencies()) {
      throw std::invalid_argument("tf-idf needs public document frequencies");
    }
    const double n = static_cast<double>(vocab.document_count());
    idf.resize(vocab.size());
    for (std::size_t j = 0; j < vocab.size(); ++j) {
      const std::size_t df = vocab.document_frequencies()[j];
      idf[j] = std::log(n / static_cast<double>(std::max<std::size_t>(df, 1)));
    }
  }

  FeatureMatrix m;
  m.cols = vocab.size();
  m.labels.reserve(corpus.size());
  std::map<std::uint32_t, double> row;
  for (const auto& ex : corpus.examples()) {
    row.clear();
    for (const auto& t : Tokenize(ex.text)) {
      if (auto idx = vocab.Lookup(t)) row[*idx] += 1.0;
    }
    if (!idf.empty()) {
      for (auto& [j, v] : row) v *= idf[j];
    }
    double norm = 0.0;
    if (l2_normalize) {
      for (const auto& [j, v] : row) norm += v * v;
      norm = std::sqrt(norm);
    }
    for (const auto& [j, v] : row) {
      if (v == 0.0) continue;
      m.col_idx.push_back(j);
      m.values.push_back(norm > 0.0 ? v / norm : v);
    }
    m.row_ptr.push_back(m.col_idx.size());
    m.labels.push_back(ex.label);
  }
  return m;
}

}  // namespace fedistill
