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

#ifndef FEDISTILL_CORPUS_H_
#define FEDISTILL_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fedistill {

// One text instance. `label` is absent for unlabeled (public) rows.
struct Example {
  std::string text;
  std::optional<int> label;
  std::string domain;

  bool operator==(const Example&) const = default;
};

// An ordered collection of examples over a fixed label space [0, C).
class Corpus {
 public:
  Corpus() = default;
  // Throws std::invalid_argument if an example violates the label range or
  // has empty text.
  Corpus(std::vector<Example> examples, int num_classes,
         std::vector<std::string> label_names = {});

  const std::vector<Example>& examples() const { return examples_; }
  const Example& operator[](std::size_t i) const { return examples_[i]; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  int num_classes() const { return num_classes_; }
  // Sorted set of domain tags present.
  const std::set<std::string>& domains() const { return domains_; }
  // Human-readable names of the classes, index = class id. May be empty.
  const std::vector<std::string>& label_names() const { return label_names_; }

  // Copies the selected rows in the given order. With `strip_labels`, every
  // returned example is unlabeled.
  Corpus Subset(std::span<const std::size_t> indices,
                bool strip_labels = false) const;

 private:
  std::vector<Example> examples_;
  int num_classes_ = 0;
  std::vector<std::string> label_names_;
  std::set<std::string> domains_;
};

enum class FileFormat { kJsonl, kCsv };

FileFormat ParseFileFormat(std::string_view name);
std::string_view FileFormatName(FileFormat format);

// Field names used to pull text / label / domain out of an input row.
// `label_map` fixes class ids (index = id); when empty it is inferred as the
// sorted set of distinct label strings in the file.
struct IngestSchema {
  std::string text_field = "text";
  std::string label_field = "label";
  std::string domain_field = "domain";
  std::string default_domain = "default";
  std::vector<std::string> label_map;

  bool operator==(const IngestSchema&) const = default;
};

// Raised for malformed input; `line()` is 1-based.
class IngestError : public std::runtime_error {
 public:
  IngestError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

Corpus Ingest(const std::filesystem::path& path, FileFormat format,
              const IngestSchema& schema);

// Lowercased runs of ASCII alphanumerics; everything else separates.
std::vector<std::string> Tokenize(std::string_view text);

// Parameters of the synthetic multi-domain generator.
//
// Each domain owns a token pool of `pool_size` tokens, the first
// round(overlap * pool_size) of which come from a pool shared by all domains.
// Every class has two label-indicative token sets in each domain: one shared
// across domains and one specific to the domain. A token slot is drawn from
// the example's label sets with probability `signal`, else from the domain
// pool. With probability `negation` a document also carries the token "not"
// and its label tokens come from the next class's sets instead, which no
// linear bag-of-words model can fully separate.
struct SyntheticSpec {
  int num_domains = 5;
  int num_classes = 2;
  int examples_per_domain = 2000;
  int pool_size = 200;
  double overlap = 0.3;
  double signal = 0.2;
  int doc_length = 24;
  int label_tokens_per_set = 8;
  double negation = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const SyntheticSpec&) const = default;
};

Corpus SynthesizeCorpus(const SyntheticSpec& spec);

// Name of the i-th synthetic domain.
std::string SyntheticDomainName(int index);

}  // namespace fedistill

#endif  // FEDISTILL_CORPUS_H_
