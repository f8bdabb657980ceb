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

#include "fedistill/corpus.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include "fedistill/random.h"
#include "json.hpp"

namespace fedistill {
namespace {

struct RawRow {
  std::size_t line;
  std::string text;
  std::optional<std::string> label;
  std::string domain;
};

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError(0, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<RawRow> ReadJsonl(const std::string& content,
                              const IngestSchema& schema) {
  std::vector<RawRow> rows;
  std::istringstream in(content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw IngestError(lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw IngestError(lineno, "row is not a JSON object");
    RawRow row{lineno, {}, std::nullopt, schema.default_domain};
    auto text = j.find(schema.text_field);
    if (text == j.end() || !text->is_string()) {
      throw IngestError(lineno, "missing string field '" + schema.text_field + "'");
    }
    row.text = text->get<std::string>();
    auto label = j.find(schema.label_field);
    if (label != j.end() && !label->is_null()) {
      if (label->is_string()) {
        row.label = label->get<std::string>();
      } else if (label->is_number_integer()) {
        row.label = std::to_string(label->get<long long>());
      } else {
        throw IngestError(lineno, "label field '" + schema.label_field +
                                      "' must be a string or null");
      }
    }
    auto domain = j.find(schema.domain_field);
    if (domain != j.end() && !domain->is_null()) {
      if (!domain->is_string()) {
        throw IngestError(lineno, "domain field '" + schema.domain_field +
                                      "' must be a string");
      }
      row.domain = domain->get<std::string>();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// RFC 4180 records: quoted fields may hold commas, doubled quotes and
// newlines. Each record carries the line it started on.
std::vector<std::pair<std::size_t, std::vector<std::string>>> SplitCsv(
    const std::string& content) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> records;
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  std::size_t line = 1;
  std::size_t record_line = 1;
  bool record_has_content = false;

  auto end_field = [&] {
    fields.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    if (record_has_content) records.emplace_back(record_line, std::move(fields));
    fields.clear();
    record_has_content = false;
  };

  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_was_quoted) {
          throw IngestError(line, "unexpected quote inside unquoted field");
        }
        in_quotes = true;
        field_was_quoted = true;
        record_has_content = true;
        break;
      case ',':
        record_has_content = true;
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        record_line = line;
        break;
      default:
        if (field_was_quoted) {
          throw IngestError(line, "text after closing quote");
        }
        record_has_content = true;
        field.push_back(c);
    }
  }
  if (in_quotes) throw IngestError(record_line, "unterminated quoted field");
  end_record();
  return records;
}

std::vector<RawRow> ReadCsv(const std::string& content,
                            const IngestSchema& schema) {
  auto records = SplitCsv(content);
  if (records.empty()) throw IngestError(1, "missing CSV header row");
  const auto& header = records.front().second;
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto text_col = column(schema.text_field);
  if (!text_col) {
    throw IngestError(records.front().first,
                      "header lacks text column '" + schema.text_field + "'");
  }
  const auto label_col = column(schema.label_field);
  const auto domain_col = column(schema.domain_field);

  std::vector<RawRow> rows;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& [lineno, fields] = records[r];
    if (fields.size() != header.size()) {
      throw IngestError(lineno, "expected " + std::to_string(header.size()) +
                                    " fields, found " +
                                    std::to_string(fields.size()));
    }
    RawRow row{lineno, fields[*text_col], std::nullopt, schema.default_domain};
    if (label_col && !fields[*label_col].empty()) row.label = fields[*label_col];
    if (domain_col && !fields[*domain_col].empty()) row.domain = fields[*domain_col];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string JoinNames(const std::vector<std::string>& names) {
  std::string out = "[";
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(i) + ":" + names[i];
  }
  return out + "]";
}

}  // namespace

Corpus::Corpus(std::vector<Example> examples, int num_classes,
               std::vector<std::string> label_names)
    : examples_(std::move(examples)),
      num_classes_(num_classes),
      label_names_(std::move(label_names)) {
  if (num_classes_ <= 0) {
    throw std::invalid_argument("corpus needs a positive class count");
  }
  if (!label_names_.empty() &&
      label_names_.size() != static_cast<std::size_t>(num_classes_)) {
    throw std::invalid_argument("label_names size differs from class count");
  }
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    const auto& ex = examples_[i];
    if (ex.text.empty()) {
      throw std::invalid_argument("example " + std::to_string(i) + " has empty text");
    }
    if (ex.label && (*ex.label < 0 || *ex.label >= num_classes_)) {
      throw std::invalid_argument("example " + std::to_string(i) +
                                  " has label out of range");
    }
    domains_.insert(ex.domain);
  }
}

Corpus Corpus::Subset(std::span<const std::size_t> indices,
                      bool strip_labels) const {
  std::vector<Example> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= examples_.size()) throw std::out_of_range("Corpus::Subset index");
    out.push_back(examples_[i]);
    if (strip_labels) out.back().label.reset();
  }
  return Corpus(std::move(out), num_classes_, label_names_);
}

FileFormat ParseFileFormat(std::string_view name) {
  if (name == "jsonl") return FileFormat::kJsonl;
  if (name == "csv") return FileFormat::kCsv;
  throw std::invalid_argument("unknown file format '" + std::string(name) + "'");
}

std::string_view FileFormatName(FileFormat format) {
  return format == FileFormat::kJsonl ? "jsonl" : "csv";
}

IngestError::IngestError(std::size_t line, const std::string& what)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what
                              : what),
      line_(line) {}

Corpus Ingest(const std::filesystem::path& path, FileFormat format,
              const IngestSchema& schema) {
  const std::string content = ReadFile(path);
  std::vector<RawRow> rows = format == FileFormat::kJsonl
                                 ? ReadJsonl(content, schema)
                                 : ReadCsv(content, schema);

  std::vector<std::string> label_map = schema.label_map;
  if (label_map.empty()) {
    std::set<std::string> seen;
    for (const auto& r : rows) {
      if (r.label) seen.insert(*r.label);
    }
    label_map.assign(seen.begin(), seen.end());
  }
  if (label_map.empty()) {
    throw IngestError(0, "no labels found and no label map given");
  }
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < label_map.size(); ++i) {
    if (!index.emplace(label_map[i], static_cast<int>(i)).second) {
      throw IngestError(0, "duplicate entry '" + label_map[i] + "' in label map");
    }
  }

  std::vector<Example> examples;
  examples.reserve(rows.size());
  for (auto& r : rows) {
    if (r.text.empty()) throw IngestError(r.line, "empty text");
    Example ex{std::move(r.text), std::nullopt, std::move(r.domain)};
    if (r.label) {
      auto it = index.find(*r.label);
      if (it == index.end()) {
        throw IngestError(r.line, "unknown label '" + *r.label +
                                      "'; label map is " + JoinNames(label_map));
      }
      ex.label = it->second;
    }
    examples.push_back(std::move(ex));
  }
  const int num_classes = static_cast<int>(label_map.size());
  return Corpus(std::move(examples), num_classes, std::move(label_map));
}

std::vector<std::string> Tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (c < 0x80 && std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string SyntheticDomainName(int index) {
  static constexpr const char* kNames[] = {"automotive", "baby", "clothing",
                                           "health", "sport"};
  if (index >= 0 && index < 5) return kNames[index];
  std::string num = std::to_string(index);
  return "domain" + std::string(num.size() < 3 ? 3 - num.size() : 0, '0') + num;
}

Corpus SynthesizeCorpus(const SyntheticSpec& spec) {
  if (spec.num_domains <= 0 || spec.num_classes <= 0 ||
      spec.examples_per_domain <= 0 || spec.pool_size <= 0 ||
      spec.doc_length <= 0 || spec.label_tokens_per_set <= 0) {
    throw std::invalid_argument("synthetic corpus counts must be positive");
  }
  if (!(spec.overlap >= 0.0 && spec.overlap <= 1.0)) {
    throw std::invalid_argument("overlap fraction must lie in [0, 1]");
  }
  if (!(spec.signal >= 0.0 && spec.signal <= 1.0)) {
    throw std::invalid_argument("signal strength must lie in [0, 1]");
  }
  if (!(spec.negation >= 0.0 && spec.negation <= 1.0)) {
    throw std::invalid_argument("negation rate must lie in [0, 1]");
  }

  const int shared = static_cast<int>(std::lround(spec.overlap * spec.pool_size));
  const int own = spec.pool_size - shared;

  std::vector<std::string> class_names;
  for (int c = 0; c < spec.num_classes; ++c) {
    class_names.push_back("class" + std::to_string(c));
  }

  Rng rng(DeriveSeed(spec.seed, {0x5e17}));
  std::uniform_int_distribution<int> pick_class(0, spec.num_classes - 1);
  std::uniform_int_distribution<int> pick_pool(0, spec.pool_size - 1);
  std::uniform_int_distribution<int> pick_label_token(0, spec.label_tokens_per_set - 1);
  std::bernoulli_distribution from_label(spec.signal);
  std::bernoulli_distribution use_domain_label_set(0.5);
  // Separate stream so a zero rate leaves the rest of the corpus unchanged.
  Rng negation_rng(DeriveSeed(spec.seed, {0x5e17, 1}));
  std::bernoulli_distribution negate(spec.negation);

  std::vector<Example> examples;
  examples.reserve(static_cast<std::size_t>(spec.num_domains) *
                   spec.examples_per_domain);
  for (int d = 0; d < spec.num_domains; ++d) {
    const std::string domain = SyntheticDomainName(d);
    // Token names carry no separators so they survive Tokenize unchanged.
    std::string tag = "d" + std::to_string(d);
    std::vector<std::string> pool;
    pool.reserve(spec.pool_size);
    for (int i = 0; i < shared; ++i) pool.push_back("com" + std::to_string(i));
    for (int i = 0; i < own; ++i) pool.push_back(tag + "w" + std::to_string(i));

    for (int n = 0; n < spec.examples_per_domain; ++n) {
      const int label = pick_class(rng);
      const bool negated = spec.negation > 0.0 && negate(negation_rng);
      const int shown = negated ? (label + 1) % spec.num_classes : label;
      std::string text = negated ? "not " : "";
      for (int s = 0; s < spec.doc_length; ++s) {
        if (s) text.push_back(' ');
        if (from_label(rng)) {
          const int t = pick_label_token(rng);
          if (use_domain_label_set(rng)) {
            text += tag + "c" + std::to_string(shown) + "t" + std::to_string(t);
          } else {
            text += "c" + std::to_string(shown) + "t" + std::to_string(t);
          }
        } else {
          text += pool[pick_pool(rng)];
        }
      }
      examples.push_back({std::move(text), label, domain});
    }
  }
  return Corpus(std::move(examples), spec.num_classes, std::move(class_names));
}

}  // namespace fedistill
