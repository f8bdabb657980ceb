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

#ifndef FEDISTILL_CONFIG_H_
#define FEDISTILL_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedistill/corpus.h"
#include "fedistill/features.h"
#include "fedistill/fed.h"
#include "fedistill/llm_provider.h"
#include "fedistill/partition.h"
#include "json.hpp"

namespace fedistill {

// Invalid or unreadable configuration. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FileSource {
  std::filesystem::path path;
  FileFormat format = FileFormat::kJsonl;
  IngestSchema schema;

  bool operator==(const FileSource&) const = default;
};

// Exactly one of the two is set.
struct CorpusSource {
  std::optional<SyntheticSpec> synthetic;
  std::optional<FileSource> file;

  bool operator==(const CorpusSource&) const = default;
};

struct NamedExperiment {
  std::string name;
  ExperimentSpec spec;

  bool operator==(const NamedExperiment&) const = default;
};

struct RunConfig {
  CorpusSource corpus;
  PartitionSpec partition;
  FeatureOptions features;
  std::vector<NamedExperiment> experiments;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  // Non-secret settings of the HTTP provider for llmwc.
  std::optional<HttpProviderConfig> llm;
  std::vector<double> betas{1, 5, 10, 15, 20};
  std::vector<int> round_counts{1, 5, 10};

  // Throws ConfigError.
  void Validate() const;
  // Sets the global seed and every derived seed from it.
  void ApplySeed(std::uint64_t seed);
};

nlohmann::json ToJson(const SyntheticSpec& spec);
SyntheticSpec SyntheticSpecFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const FeatureOptions& options);
FeatureOptions FeatureOptionsFromJson(const nlohmann::json& j);

nlohmann::json ToJson(const RunConfig& config);
// Throws ConfigError naming the offending field. Sub-seeds left out default
// to the top-level seed.
RunConfig RunConfigFromJson(const nlohmann::json& j);
// Reads JSON; parse errors carry the line and column.
RunConfig LoadRunConfig(const std::filesystem::path& path);

Corpus LoadCorpus(const CorpusSource& source);

// The desk-scale synthetic benchmark: five domains, three classes, Dirichlet
// alpha = 1 label skew, 2000 examples per client, heterogeneous clients,
// T = 5 and E = 3. One experiment per method in `methods`.
RunConfig DeskBenchmarkConfig(std::span<const Method> methods, std::uint64_t seed = 0);

}  // namespace fedistill

#endif  // FEDISTILL_CONFIG_H_
