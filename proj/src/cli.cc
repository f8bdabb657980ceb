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

#include "fedistill/cli.h"

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "fedistill/config.h"
#include "fedistill/fed.h"
#include "fedistill/llm_provider.h"
#include "fedistill/partition.h"
#include "fedistill/sweep.h"

namespace fedistill {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> methods;
  std::string llm_endpoint_env;
  std::string manifest;
  std::vector<std::string> reports;
};

struct Workspace {
  RunConfig config;
  Corpus corpus;
  PartitionPlan plan;
};

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string Format(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

RunConfig ResolveConfig(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config is required");
  RunConfig config = LoadRunConfig(o.config);
  if (o.seed) config.ApplySeed(*o.seed);
  if (!o.out.empty()) config.output_dir = o.out;
  if (!o.methods.empty()) {
    // Each --method clones the first experiment with the method replaced.
    const ExperimentSpec base = config.experiments.front().spec;
    config.experiments.clear();
    for (const auto& name : o.methods) {
      ExperimentSpec spec = base;
      try {
        spec.method = ParseMethod(name);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("--method: ") + e.what());
      }
      config.experiments.push_back({name, spec});
    }
  }
  config.Validate();
  return config;
}

Workspace Prepare(const Options& o) {
  RunConfig config = ResolveConfig(o);
  Corpus corpus = [&] {
    try {
      return LoadCorpus(config.corpus);
    } catch (const IngestError& e) {
      throw ConfigError(std::string("corpus: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("corpus: ") + e.what());
    }
  }();
  PartitionPlan plan = [&] {
    if (o.manifest.empty()) return BuildPlan(corpus, config.partition);
    PartitionPlan loaded = [&] {
      try {
        return PartitionPlan::FromJson(nlohmann::json::parse(ReadFile(o.manifest)));
      } catch (const std::exception& e) {
        throw ConfigError("--manifest " + o.manifest + ": " + e.what());
      }
    }();
    if (loaded.corpus_size != corpus.size()) {
      throw ConfigError("--manifest was built for " + std::to_string(loaded.corpus_size) +
                        " examples but the corpus has " + std::to_string(corpus.size()));
    }
    return loaded;
  }();
  return {std::move(config), std::move(corpus), std::move(plan)};
}

void WriteJson(const fs::path& path, const nlohmann::json& j) {
  WriteFileAtomic(path, j.dump(2) + "\n");
}

void WriteCommon(const Workspace& w) {
  fs::create_directories(w.config.output_dir);
  WriteJson(w.config.output_dir / "config.json", ToJson(w.config));
  WriteJson(w.config.output_dir / "manifest.json", w.plan.ToJson());
}

std::unique_ptr<LlmProvider> MakeProvider(const RunConfig& config, const Options& o) {
  if (o.llm_endpoint_env.empty()) return std::make_unique<OfflineLossProvider>();
  const char* endpoint = std::getenv(o.llm_endpoint_env.c_str());
  if (endpoint == nullptr || *endpoint == '\0') {
    throw ConfigError("--llm-endpoint-env: environment variable " + o.llm_endpoint_env +
                      " is not set");
  }
  HttpProviderConfig http = config.llm.value_or(HttpProviderConfig{});
  http.endpoint = endpoint;
  return std::make_unique<HttpProvider>(std::move(http));
}

int CmdPartition(const Options& o, std::ostream& out) {
  Workspace w = Prepare(o);
  WriteCommon(w);
  WriteJson(w.config.output_dir / "distribution_report.json",
            MakeDistributionReport(w.plan, w.corpus).ToJson());
  out << "partition: " << w.plan.num_clients() << " clients, " << w.plan.public_set.size()
      << " public examples -> " << (w.config.output_dir / "manifest.json").string() << "\n";
  return kExitOk;
}

int CmdRun(const Options& o, std::ostream& out) {
  Workspace w = Prepare(o);
  WriteCommon(w);
  FederatedDataset data = BuildFederatedDataset(w.corpus, w.plan, w.config.features);
  std::unique_ptr<LlmProvider> provider = MakeProvider(w.config, o);
  std::string all_reports;
  for (const auto& e : w.config.experiments) {
    ExperimentResult result = RunExperiment(e.spec, data, provider.get());
    EvalReport report = EvaluateResult(result, e.spec, data);
    report.method = e.name;
    const fs::path dir = w.config.output_dir / e.name;
    fs::create_directories(dir);
    std::ostringstream traces, weights, csv;
    WriteTracesJsonl(traces, result.traces);
    WriteWeightsCsv(weights, result.traces);
    const EvalReport one[] = {report};
    WriteReportCsv(csv, one);
    nlohmann::json checkpoint;
    if (result.server) {
      checkpoint = result.server->ToJson();
    } else {
      checkpoint["clients"] = nlohmann::json::array();
      for (const auto& c : result.clients) checkpoint["clients"].push_back(c.ToJson());
    }
    WriteFileAtomic(dir / "traces.jsonl", traces.str());
    WriteFileAtomic(dir / "weights.csv", weights.str());
    WriteFileAtomic(dir / "report.csv", csv.str());
    WriteJson(dir / "model.json", checkpoint);
    // The report goes last: its presence marks a finished experiment.
    WriteJson(dir / "report.json", report.ToJson());
    all_reports += report.ToJson().dump() + "\n";
    out << e.name << ": global_f1=" << Format(report.global_f1)
        << " client_specific_f1=" << Format(report.client_specific_f1) << "\n";
  }
  WriteFileAtomic(w.config.output_dir / "reports.jsonl", all_reports);
  return kExitOk;
}

std::vector<EvalReport> LoadReports(const std::string& path) {
  const std::string text = ReadFile(path);
  std::vector<EvalReport> reports;
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.is_array()) {
      for (const auto& r : j) reports.push_back(EvalReport::FromJson(r));
    } else {
      reports.push_back(EvalReport::FromJson(j));
    }
    return reports;
  } catch (const nlohmann::json::parse_error&) {
    // Fall through to JSON lines.
  }
  std::istringstream lines(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      reports.push_back(EvalReport::FromJson(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::invalid_argument(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return reports;
}

int CmdCompare(const Options& o, std::ostream& out) {
  std::vector<EvalReport> reports;
  for (const auto& path : o.reports) {
    auto loaded = LoadReports(path);
    reports.insert(reports.end(), loaded.begin(), loaded.end());
  }
  const std::string table = CompareReports(reports);
  if (o.out.empty()) {
    out << table;
  } else {
    WriteFileAtomic(o.out, table);
    out << "compare: " << reports.size() << " reports -> " << o.out << "\n";
  }
  return kExitOk;
}

int CmdSweepBeta(const Options& o, std::ostream& out) {
  Workspace w = Prepare(o);
  WriteCommon(w);
  FederatedDataset data = BuildFederatedDataset(w.corpus, w.plan, w.config.features);
  ExperimentSpec spec = w.config.experiments.front().spec;
  spec.method = Method::kAdafdEnwc;
  std::vector<BetaPoint> points = BetaSweep(spec, data, w.config.betas);
  std::ostringstream weights;
  WriteBetaWeightsCsv(weights, points);
  std::string reports;
  for (const auto& p : points) {
    nlohmann::json j = p.report.ToJson();
    j["beta"] = p.beta;
    reports += j.dump() + "\n";
    out << "beta=" << p.beta << ": global_f1=" << Format(p.report.global_f1) << "\n";
  }
  WriteFileAtomic(w.config.output_dir / "beta_weights.csv", weights.str());
  WriteFileAtomic(w.config.output_dir / "beta_reports.jsonl", reports);
  return kExitOk;
}

int CmdSweepRounds(const Options& o, std::ostream& out) {
  Workspace w = Prepare(o);
  WriteCommon(w);
  FederatedDataset data = BuildFederatedDataset(w.corpus, w.plan, w.config.features);
  std::unique_ptr<LlmProvider> provider = MakeProvider(w.config, o);
  std::vector<RoundsPoint> all;
  std::string reports;
  for (const auto& e : w.config.experiments) {
    if (e.spec.method == Method::kFedKd) {
      out << e.name << ": skipped, fedkd distills once\n";
      continue;
    }
    std::vector<RoundsPoint> points = RoundsSweep(e.spec, data, w.config.round_counts,
                                                  provider.get());
    for (auto& p : points) {
      p.report.method = e.name;
      nlohmann::json j = p.report.ToJson();
      j["rounds"] = p.rounds;
      reports += j.dump() + "\n";
      out << e.name << " T=" << p.rounds << ": global_f1=" << Format(p.report.global_f1)
          << "\n";
      all.push_back(std::move(p));
    }
  }
  std::ostringstream csv;
  WriteRoundsCsv(csv, all);
  WriteFileAtomic(w.config.output_dir / "rounds_sweep.csv", csv.str());
  WriteFileAtomic(w.config.output_dir / "rounds_reports.jsonl", reports);
  return kExitOk;
}

}  // namespace

void WriteFileAtomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.flush();
    if (!f) {
      f.close();
      fs::remove(tmp);
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

std::string CompareReports(std::span<const EvalReport> reports) {
  if (reports.size() < 2) throw std::invalid_argument("compare needs at least two reports");
  std::set<std::string> domains;
  for (const auto& [d, f1] : reports.front().domain_f1) domains.insert(d);
  for (const auto& r : reports) {
    std::set<std::string> mine;
    for (const auto& [d, f1] : r.domain_f1) mine.insert(d);
    if (mine != domains) {
      throw std::invalid_argument("report '" + r.method + "' covers different test sets than '" +
                                  reports.front().method + "'");
    }
  }
  std::vector<std::string> columns{"global", "client_specific"};
  columns.insert(columns.end(), domains.begin(), domains.end());
  auto value = [](const EvalReport& r, const std::string& col) {
    if (col == "global") return r.global_f1;
    if (col == "client_specific") return r.client_specific_f1;
    return r.domain_f1.at(col);
  };
  std::vector<double> best(columns.size(), -1.0);
  for (const auto& r : reports) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      best[c] = std::max(best[c], value(r, columns[c]));
    }
  }
  std::ostringstream s;
  s << "method";
  for (const auto& c : columns) s << ',' << c;
  s << '\n';
  for (const auto& r : reports) {
    s << r.method;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const double v = value(r, columns[c]);
      s << ',' << Format(v) << (v == best[c] ? "*" : "");
    }
    s << '\n';
  }
  return s.str();
}

int RunCli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated distillation experiments over multi-domain text", "fedistill"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "JSON run configuration")->required();
    cmd->add_option("--out", o.out, "Output directory (overrides output_dir)");
    cmd->add_option("--seed", o.seed, "Global seed (overrides every seed in the config)");
    cmd->add_option("--manifest", o.manifest, "Reuse a partition manifest");
  };
  auto add_methods = [&](CLI::App* cmd) {
    cmd->add_option("--method", o.methods, "Run this method; repeatable");
    cmd->add_option("--llm-endpoint-env", o.llm_endpoint_env,
                    "Environment variable holding the LLM endpoint URL");
  };
  CLI::App* partition = app.add_subcommand("partition", "Build and save a partition manifest");
  add_common(partition);
  CLI::App* run = app.add_subcommand("run", "Run experiments and write traces and reports");
  add_common(run);
  add_methods(run);
  CLI::App* compare = app.add_subcommand("compare", "Tabulate reports by method and test set");
  compare->add_option("reports", o.reports, "report.json or reports.jsonl files")
      ->required()
      ->check(CLI::ExistingFile);
  compare->add_option("--out", o.out, "Write the CSV here instead of stdout");
  CLI::App* sweep_beta = app.add_subcommand("sweep-beta", "adafd_enwc over the config's betas");
  add_common(sweep_beta);
  CLI::App* sweep_rounds =
      app.add_subcommand("sweep-rounds", "Each experiment over the config's round counts");
  add_common(sweep_rounds);
  add_methods(sweep_rounds);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }

  try {
    if (partition->parsed()) return CmdPartition(o, out);
    if (run->parsed()) return CmdRun(o, out);
    if (compare->parsed()) return CmdCompare(o, out);
    if (sweep_beta->parsed()) return CmdSweepBeta(o, out);
    if (sweep_rounds->parsed()) return CmdSweepRounds(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRunError;
  }
  return kExitConfigError;
}

}  // namespace fedistill
