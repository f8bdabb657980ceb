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

#include "fedistill/config.h"

#include <array>
#include <fstream>
#include <sstream>

namespace fedistill {
namespace {

// Keys that would put a credential into a config file.
constexpr std::array<std::string_view, 6> kSecretKeys = {
    "api_key", "apikey", "key", "token", "secret", "password"};

template <typename Fn>
auto Field(std::string_view where, Fn fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string(where) + ": " + e.what());
  }
}

void RejectUnknown(const nlohmann::json& j, std::string_view where,
                   std::initializer_list<std::string_view> known) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || k == key;
    if (!ok) throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
  }
}

nlohmann::json ToJson(const IngestSchema& s) {
  return {{"text_field", s.text_field},   {"label_field", s.label_field},
          {"domain_field", s.domain_field}, {"default_domain", s.default_domain},
          {"label_map", s.label_map}};
}

IngestSchema IngestSchemaFromJson(const nlohmann::json& j) {
  IngestSchema s;
  s.text_field = j.value("text_field", s.text_field);
  s.label_field = j.value("label_field", s.label_field);
  s.domain_field = j.value("domain_field", s.domain_field);
  s.default_domain = j.value("default_domain", s.default_domain);
  s.label_map = j.value("label_map", s.label_map);
  return s;
}

}  // namespace

nlohmann::json ToJson(const SyntheticSpec& s) {
  return {{"num_domains", s.num_domains},
          {"num_classes", s.num_classes},
          {"examples_per_domain", s.examples_per_domain},
          {"pool_size", s.pool_size},
          {"overlap", s.overlap},
          {"signal", s.signal},
          {"doc_length", s.doc_length},
          {"label_tokens_per_set", s.label_tokens_per_set},
          {"negation", s.negation},
          {"seed", s.seed}};
}

SyntheticSpec SyntheticSpecFromJson(const nlohmann::json& j) {
  RejectUnknown(j, "corpus.synthetic",
                {"num_domains", "num_classes", "examples_per_domain", "pool_size", "overlap",
                 "signal", "doc_length", "label_tokens_per_set", "negation", "seed"});
  SyntheticSpec s;
  s.num_domains = j.value("num_domains", s.num_domains);
  s.num_classes = j.value("num_classes", s.num_classes);
  s.examples_per_domain = j.value("examples_per_domain", s.examples_per_domain);
  s.pool_size = j.value("pool_size", s.pool_size);
  s.overlap = j.value("overlap", s.overlap);
  s.signal = j.value("signal", s.signal);
  s.doc_length = j.value("doc_length", s.doc_length);
  s.label_tokens_per_set = j.value("label_tokens_per_set", s.label_tokens_per_set);
  s.negation = j.value("negation", s.negation);
  s.seed = j.value("seed", s.seed);
  return s;
}

nlohmann::json ToJson(const FeatureOptions& o) {
  return {{"max_features", o.max_features},
          {"vocabulary", VocabularyModeName(o.mode)},
          {"weighting", WeightingSchemeName(o.scheme)},
          {"l2_normalize", o.l2_normalize}};
}

FeatureOptions FeatureOptionsFromJson(const nlohmann::json& j) {
  RejectUnknown(j, "features", {"max_features", "vocabulary", "weighting", "l2_normalize"});
  FeatureOptions o;
  o.max_features = j.value("max_features", o.max_features);
  if (j.contains("vocabulary")) {
    o.mode = ParseVocabularyMode(j.at("vocabulary").get<std::string>());
  }
  if (j.contains("weighting")) {
    o.scheme = ParseWeightingScheme(j.at("weighting").get<std::string>());
  }
  o.l2_normalize = j.value("l2_normalize", o.l2_normalize);
  return o;
}

void RunConfig::Validate() const {
  if (corpus.synthetic.has_value() == corpus.file.has_value()) {
    throw ConfigError("corpus: set exactly one of 'synthetic' or 'file'");
  }
  if (experiments.empty()) throw ConfigError("experiments: at least one is required");
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
  Field("partition", [&] { partition.Validate(); });
  for (std::size_t i = 0; i < experiments.size(); ++i) {
    const auto& e = experiments[i];
    const std::string where = "experiments[" + std::to_string(i) + "]";
    if (e.name.empty()) throw ConfigError(where + ": name must not be empty");
    if (e.name.find_first_of("/\\") != std::string::npos || e.name == "." || e.name == "..") {
      throw ConfigError(where + ": name '" + e.name + "' is not a plain file name");
    }
    for (std::size_t k = 0; k < i; ++k) {
      if (experiments[k].name == e.name) {
        throw ConfigError(where + ": duplicate name '" + e.name + "'");
      }
    }
    Field(where, [&] { e.spec.Validate(static_cast<std::size_t>(partition.num_clients)); });
  }
  if (betas.empty()) throw ConfigError("betas: must not be empty");
  if (round_counts.empty()) throw ConfigError("round_counts: must not be empty");
  for (int t : round_counts) {
    if (t < 1) throw ConfigError("round_counts: entries must be >= 1");
  }
}

void RunConfig::ApplySeed(std::uint64_t s) {
  seed = s;
  if (corpus.synthetic) corpus.synthetic->seed = s;
  partition.seed = s;
  for (auto& e : experiments) e.spec.seed = s;
}

nlohmann::json ToJson(const RunConfig& c) {
  nlohmann::json corpus;
  if (c.corpus.synthetic) corpus["synthetic"] = ToJson(*c.corpus.synthetic);
  if (c.corpus.file) {
    corpus["file"] = {{"path", c.corpus.file->path.string()},
                      {"format", FileFormatName(c.corpus.file->format)},
                      {"schema", ToJson(c.corpus.file->schema)}};
  }
  nlohmann::json experiments = nlohmann::json::array();
  for (const auto& e : c.experiments) {
    nlohmann::json j = ToJson(e.spec);
    j["name"] = e.name;
    experiments.push_back(std::move(j));
  }
  nlohmann::json j = {{"corpus", corpus},
                      {"partition", ToJson(c.partition)},
                      {"features", ToJson(c.features)},
                      {"experiments", experiments},
                      {"output_dir", c.output_dir.string()},
                      {"seed", c.seed},
                      {"betas", c.betas},
                      {"round_counts", c.round_counts}};
  if (c.llm) j["llm"] = ToJson(*c.llm);
  return j;
}

RunConfig RunConfigFromJson(const nlohmann::json& j) {
  RejectUnknown(j, "config",
                {"corpus", "partition", "features", "experiments", "output_dir", "seed", "llm",
                 "betas", "round_counts"});
  RunConfig c;
  c.seed = Field("seed", [&] { return j.value("seed", std::uint64_t{0}); });
  if (!j.contains("corpus")) throw ConfigError("corpus: missing");
  const auto& corpus = j.at("corpus");
  RejectUnknown(corpus, "corpus", {"synthetic", "file"});
  if (corpus.contains("synthetic")) {
    c.corpus.synthetic = Field("corpus.synthetic", [&] {
      SyntheticSpec s = SyntheticSpecFromJson(corpus.at("synthetic"));
      if (!corpus.at("synthetic").contains("seed")) s.seed = c.seed;
      return s;
    });
  }
  if (corpus.contains("file")) {
    c.corpus.file = Field("corpus.file", [&] {
      const auto& f = corpus.at("file");
      RejectUnknown(f, "corpus.file", {"path", "format", "schema"});
      FileSource src;
      src.path = f.at("path").get<std::string>();
      src.format = ParseFileFormat(f.value("format", std::string("jsonl")));
      if (f.contains("schema")) src.schema = IngestSchemaFromJson(f.at("schema"));
      return src;
    });
  }
  c.partition = Field("partition", [&] {
    nlohmann::json p = j.value("partition", nlohmann::json::object());
    if (!p.contains("seed")) p["seed"] = c.seed;
    return PartitionSpecFromJson(p);
  });
  if (j.contains("features")) {
    c.features = Field("features", [&] { return FeatureOptionsFromJson(j.at("features")); });
  }
  if (!j.contains("experiments") || !j.at("experiments").is_array()) {
    throw ConfigError("experiments: expected an array");
  }
  for (std::size_t i = 0; i < j.at("experiments").size(); ++i) {
    const auto& e = j.at("experiments")[i];
    c.experiments.push_back(Field("experiments[" + std::to_string(i) + "]", [&] {
      ExperimentSpec defaults;
      defaults.seed = c.seed;
      NamedExperiment named{"", ExperimentSpecFromJson(e, defaults)};
      named.name = e.value("name", std::string(MethodName(named.spec.method)));
      return named;
    }));
  }
  c.output_dir = Field("output_dir", [&] { return j.value("output_dir", std::string("out")); });
  if (j.contains("llm")) {
    const auto& llm = j.at("llm");
    if (!llm.is_object()) throw ConfigError("llm: expected an object");
    for (const auto& [key, value] : llm.items()) {
      for (auto secret : kSecretKeys) {
        if (key == secret) {
          throw ConfigError("llm." + key +
                            ": credentials are read from the environment only; name the "
                            "variable with 'api_key_env'");
        }
      }
    }
    c.llm = Field("llm", [&] { return HttpProviderConfigFromJson(llm); });
  }
  c.betas = Field("betas", [&] { return j.value("betas", c.betas); });
  c.round_counts = Field("round_counts", [&] { return j.value("round_counts", c.round_counts); });
  c.Validate();
  return c;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Translate the byte offset into a line and column.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": " + e.what());
  }
  return RunConfigFromJson(j);
}

Corpus LoadCorpus(const CorpusSource& source) {
  if (source.synthetic) return SynthesizeCorpus(*source.synthetic);
  if (source.file) return Ingest(source.file->path, source.file->format, source.file->schema);
  throw ConfigError("corpus: no source configured");
}

RunConfig DeskBenchmarkConfig(std::span<const Method> methods, std::uint64_t seed) {
  RunConfig c;
  SyntheticSpec synthetic;
  synthetic.num_domains = 5;
  synthetic.num_classes = 3;
  synthetic.examples_per_domain = 8000;
  synthetic.signal = 0.1;
  c.corpus.synthetic = synthetic;

  c.partition.num_clients = 5;
  c.partition.alpha = 1.0;
  c.partition.regime = Regime::kMultiDomainNonIid;
  c.partition.downsample_size = 2000;
  c.partition.global_test_size = 600;

  ExperimentSpec base;
  base.rounds = 5;
  base.local_epochs = 3;
  base.client_architectures = {Architecture::Linear(), Architecture::Mlp({16}),
                               Architecture::Mlp({32}), Architecture::Mlp({64}),
                               Architecture::Mlp({128})};
  base.server_architecture = Architecture::Linear();
  base.server_training.epochs = 5;
  for (Method m : methods) {
    ExperimentSpec spec = base;
    spec.method = m;
    c.experiments.push_back({std::string(MethodName(m)), spec});
  }
  c.output_dir = "out";
  c.ApplySeed(seed);
  return c;
}

}  // namespace fedistill
