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

#include "fedistill/fed.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>
#include <utility>

#include "fedistill/random.h"

namespace fedistill {
namespace {

constexpr std::uint64_t kTagClientInit = 101;
constexpr std::uint64_t kTagServerInit = 102;
constexpr std::uint64_t kTagLocalTrain = 103;
constexpr std::uint64_t kTagServerDistill = 104;
constexpr std::uint64_t kTagLocalDistill = 105;
constexpr std::uint64_t kTagCentral = 106;

constexpr std::pair<Method, std::string_view> kMethodNames[] = {
    {Method::kAdafdRnwc, "adafd_rnwc"}, {Method::kAdafdEnwc, "adafd_enwc"},
    {Method::kAdafdLlmwc, "adafd_llmwc"}, {Method::kFedAvg, "fedavg"},
    {Method::kDsfl, "dsfl"},           {Method::kMhat, "mhat"},
    {Method::kFedKd, "fedkd"},         {Method::kCentralized, "centralized"},
    {Method::kLocalOnly, "local_only"},
};

std::uint64_t U(int v) { return static_cast<std::uint64_t>(v); }

TrainingConfig Seeded(TrainingConfig config, std::uint64_t seed) {
  config.seed = seed;
  return config;
}

// Runs fn(k) for every client, on one thread each when `parallel`. The first
// failure by client id is rethrown as an ExperimentError.
template <typename Fn>
void ForEachClient(std::size_t n, bool parallel, int round, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  auto guarded = [&](std::size_t k) {
    try {
      fn(k);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  if (parallel && n > 1) {
    std::vector<std::thread> workers;
    workers.reserve(n);
    for (std::size_t k = 0; k < n; ++k) workers.emplace_back(guarded, k);
    for (auto& w : workers) w.join();
  } else {
    for (std::size_t k = 0; k < n; ++k) guarded(k);
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const std::exception& e) {
      throw ExperimentError(round, static_cast<int>(k), e.what());
    }
  }
}

double DevF1(const Classifier& model, const FeatureMatrix& dev, F1Average average) {
  if (dev.rows() == 0) return 0.0;
  return F1Score(PredictLabels(model, dev), dev.DenseLabels(), model.num_classes(), average);
}

void FillEvaluation(RoundTrace& trace, const EvalReport& report) {
  trace.global_f1 = report.global_f1;
  trace.domain_f1 = report.domain_f1;
}

std::vector<Client> MakeClients(const ExperimentSpec& spec, const FederatedDataset& data) {
  std::vector<Client> clients;
  clients.reserve(data.num_clients());
  for (std::size_t k = 0; k < data.num_clients(); ++k) {
    Classifier model(spec.client_architecture(k), data.vocabulary.size(), data.num_classes,
                     DeriveSeed(spec.seed, {kTagClientInit, k}));
    clients.emplace_back(static_cast<int>(k), std::move(model), data.client_train[k],
                         data.client_dev[k]);
  }
  return clients;
}

void RecordClients(RoundTrace& trace, std::span<const ClientRoundReport> reports) {
  for (const auto& r : reports) {
    trace.client_l_min.push_back(r.loss.l_min());
    trace.client_dev_f1.push_back(r.dev_f1);
    trace.client_epoch_losses.push_back(r.loss.epoch_losses);
  }
}

ExperimentResult RunCentralized(const ExperimentSpec& spec, const FederatedDataset& data,
                                bool track_test_f1) {
  FeatureMatrix pooled = FeatureMatrix::Stack(data.client_train);
  FeatureMatrix dev = FeatureMatrix::Stack(data.client_dev);
  Classifier model(spec.server_architecture, data.vocabulary.size(), data.num_classes,
                   DeriveSeed(spec.seed, {kTagServerInit}));
  ExperimentResult result;
  result.method = spec.method;
  std::optional<Classifier> best;
  double best_score = -1.0;
  for (int t = 1; t <= spec.rounds; ++t) {
    TrainingConfig config = Seeded(spec.local_training, DeriveSeed(spec.seed, {kTagCentral, U(t)}));
    config.epochs = spec.local_epochs;
    LossRecord loss;
    try {
      loss = TrainSupervised(model, pooled, config);
    } catch (const std::exception& e) {
      throw ExperimentError(t, std::nullopt, e.what());
    }
    RoundTrace trace;
    trace.round = t;
    trace.client_l_min.push_back(loss.l_min());
    trace.client_dev_f1.push_back(DevF1(model, dev, spec.f1_average));
    trace.client_epoch_losses.push_back(loss.epoch_losses);
    if (track_test_f1) FillEvaluation(trace, Evaluate(model, data.eval, spec.f1_average));
    if (spec.select_best_by_dev) {
      trace.selection_dev_f1 = trace.client_dev_f1[0];
      if (*trace.selection_dev_f1 > best_score) {
        best_score = *trace.selection_dev_f1;
        best = model;
        result.selected_round = t;
      }
    }
    result.traces.push_back(std::move(trace));
  }
  if (best) {
    result.server = std::move(best);
  } else {
    result.server = std::move(model);
    result.selected_round = spec.rounds;
  }
  return result;
}

ExperimentResult RunLocalOnly(const ExperimentSpec& spec, const FederatedDataset& data,
                              bool track_test_f1) {
  std::vector<Client> clients = MakeClients(spec, data);
  ExperimentResult result;
  result.method = spec.method;
  result.selected_round = spec.rounds;
  std::vector<std::optional<Classifier>> best(clients.size());
  std::vector<double> best_score(clients.size(), -1.0);
  for (int t = 1; t <= spec.rounds; ++t) {
    std::vector<LossRecord> records(clients.size());
    ForEachClient(clients.size(), spec.parallel_clients, t, [&](std::size_t k) {
      TrainingConfig config =
          Seeded(spec.local_training, DeriveSeed(spec.seed, {kTagLocalTrain, U(t), k}));
      config.epochs = spec.local_epochs;
      records[k] = clients[k].TrainOnly(config, spec.f1_average);
    });
    RoundTrace trace;
    trace.round = t;
    for (const auto& r : records) {
      trace.client_l_min.push_back(r.l_min());
      trace.client_dev_f1.push_back(r.dev_f1.value_or(0.0));
      trace.client_epoch_losses.push_back(r.epoch_losses);
    }
    if (track_test_f1) {
      std::vector<Classifier> models;
      for (const auto& c : clients) models.push_back(c.model());
      FillEvaluation(trace, EvaluateMean(models, data.eval, spec.f1_average));
    }
    if (spec.select_best_by_dev) {
      // Each client keeps its own best round.
      for (std::size_t k = 0; k < clients.size(); ++k) {
        if (trace.client_dev_f1[k] > best_score[k]) {
          best_score[k] = trace.client_dev_f1[k];
          best[k] = clients[k].model();
        }
      }
    }
    result.traces.push_back(std::move(trace));
  }
  for (std::size_t k = 0; k < clients.size(); ++k) {
    result.clients.push_back(best[k] ? *best[k] : clients[k].model());
  }
  return result;
}

}  // namespace

Method ParseMethod(std::string_view name) {
  for (const auto& [m, n] : kMethodNames) {
    if (n == name) return m;
  }
  throw std::invalid_argument("unknown method: " + std::string(name));
}

std::string_view MethodName(Method method) {
  for (const auto& [m, n] : kMethodNames) {
    if (m == method) return n;
  }
  throw std::logic_error("unhandled method");
}

bool IsFederated(Method method) {
  return method != Method::kCentralized && method != Method::kLocalOnly;
}

void ExperimentSpec::Validate(std::size_t num_clients) const {
  if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
  if (local_epochs < 1) throw std::invalid_argument("local_epochs must be >= 1");
  if (num_clients == 0) throw std::invalid_argument("experiment needs at least one client");
  if (client_architectures.empty()) {
    throw std::invalid_argument("client_architectures must not be empty");
  }
  if (client_architectures.size() != 1 && client_architectures.size() != num_clients) {
    throw std::invalid_argument("client_architectures has " +
                                std::to_string(client_architectures.size()) +
                                " entries for " + std::to_string(num_clients) + " clients");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("temperature must be positive");
  }
  if (server_loss_override == LossKind::kCrossEntropy) {
    throw std::invalid_argument("server loss must compare logits, not labels");
  }
  strategy.Validate();
  local_training.Validate();
  server_training.Validate();
  local_distill.Validate();
}

const Architecture& ExperimentSpec::client_architecture(std::size_t k) const {
  return client_architectures.size() == 1 ? client_architectures.front()
                                          : client_architectures.at(k);
}

StrategyKind ExperimentSpec::ResolvedStrategy() const {
  if (strategy_override) return *strategy_override;
  switch (method) {
    case Method::kAdafdRnwc:
      return StrategyKind::kRnwc;
    case Method::kAdafdEnwc:
      return StrategyKind::kEnwc;
    case Method::kAdafdLlmwc:
      return StrategyKind::kLlmwc;
    case Method::kFedAvg:
      return StrategyKind::kUniform;
    default:
      return StrategyKind::kDataSize;
  }
}

LossSpec ExperimentSpec::ResolvedServerLoss() const {
  if (server_loss_override) return {*server_loss_override, temperature};
  switch (method) {
    case Method::kAdafdRnwc:
    case Method::kAdafdEnwc:
    case Method::kAdafdLlmwc:
      return {LossKind::kL2Logit, 1.0};
    case Method::kMhat:
      return {LossKind::kSoftCrossEntropy, 1.0};
    default:
      return {LossKind::kKl, temperature};
  }
}

nlohmann::json ToJson(const ExperimentSpec& spec) {
  nlohmann::json archs = nlohmann::json::array();
  for (const auto& a : spec.client_architectures) archs.push_back(a.ToString());
  nlohmann::json j = {{"method", MethodName(spec.method)},
                      {"rounds", spec.rounds},
                      {"local_epochs", spec.local_epochs},
                      {"client_architectures", archs},
                      {"server_architecture", spec.server_architecture.ToString()},
                      {"strategy", ToJson(spec.strategy)},
                      {"temperature", spec.temperature},
                      {"local_training", ToJson(spec.local_training)},
                      {"server_training", ToJson(spec.server_training)},
                      {"local_distill", ToJson(spec.local_distill)},
                      {"seed", spec.seed},
                      {"parallel_clients", spec.parallel_clients},
                      {"select_best_by_dev", spec.select_best_by_dev},
                      {"f1_average", F1AverageName(spec.f1_average)}};
  if (spec.strategy_override) {
    j["strategy_override"] = StrategyKindName(*spec.strategy_override);
  }
  if (spec.server_loss_override) {
    j["server_loss_override"] = LossKindName(*spec.server_loss_override);
  }
  return j;
}

ExperimentSpec ExperimentSpecFromJson(const nlohmann::json& j, const ExperimentSpec& defaults) {
  ExperimentSpec s = defaults;
  if (j.contains("method")) s.method = ParseMethod(j.at("method").get<std::string>());
  s.rounds = j.value("rounds", s.rounds);
  s.local_epochs = j.value("local_epochs", s.local_epochs);
  if (j.contains("client_architectures")) {
    s.client_architectures.clear();
    for (const auto& a : j.at("client_architectures")) {
      s.client_architectures.push_back(Architecture::Parse(a.get<std::string>()));
    }
  }
  if (j.contains("server_architecture")) {
    s.server_architecture = Architecture::Parse(j.at("server_architecture").get<std::string>());
  }
  if (j.contains("strategy")) s.strategy = StrategyConfigFromJson(j.at("strategy"), s.strategy);
  if (j.contains("strategy_override")) {
    s.strategy_override = ParseStrategyKind(j.at("strategy_override").get<std::string>());
  }
  if (j.contains("server_loss_override")) {
    s.server_loss_override = ParseLossKind(j.at("server_loss_override").get<std::string>());
  }
  s.temperature = j.value("temperature", s.temperature);
  if (j.contains("local_training")) {
    s.local_training = TrainingConfigFromJson(j.at("local_training"), s.local_training);
  }
  if (j.contains("server_training")) {
    s.server_training = TrainingConfigFromJson(j.at("server_training"), s.server_training);
  }
  if (j.contains("local_distill")) {
    s.local_distill = TrainingConfigFromJson(j.at("local_distill"), s.local_distill);
  }
  s.seed = j.value("seed", s.seed);
  s.parallel_clients = j.value("parallel_clients", s.parallel_clients);
  s.select_best_by_dev = j.value("select_best_by_dev", s.select_best_by_dev);
  if (j.contains("f1_average")) {
    s.f1_average = ParseF1Average(j.at("f1_average").get<std::string>());
  }
  return s;
}

FederatedDataset BuildFederatedDataset(const Corpus& corpus, const PartitionPlan& plan,
                                       const FeatureOptions& options) {
  plan.Validate();
  if (plan.corpus_size != corpus.size()) {
    throw std::invalid_argument("plan was built for a corpus of " +
                                std::to_string(plan.corpus_size) + " rows, got " +
                                std::to_string(corpus.size()));
  }
  FederatedDataset data;
  data.num_classes = corpus.num_classes();
  Corpus public_corpus = corpus.Subset(plan.public_set, /*strip_labels=*/true);
  data.vocabulary = Vocabulary::Build(public_corpus, options.max_features, options.mode);
  data.public_features =
      Featurize(public_corpus, data.vocabulary, options.scheme, options.l2_normalize);
  for (const auto& split : plan.splits) {
    data.client_train.push_back(Featurize(corpus.Subset(split.train), data.vocabulary,
                                          options.scheme, options.l2_normalize));
    data.client_dev.push_back(Featurize(corpus.Subset(split.dev), data.vocabulary,
                                        options.scheme, options.l2_normalize));
  }
  data.eval = BuildEvaluationSets(plan, corpus, data.vocabulary, options);
  return data;
}

ExperimentError::ExperimentError(int round, std::optional<int> client, const std::string& what)
    : std::runtime_error("round " + std::to_string(round) +
                         (client ? ", client " + std::to_string(*client) : std::string()) +
                         ": " + what),
      round_(round),
      client_(client) {}

Client::Client(int id, Classifier model, FeatureMatrix train, FeatureMatrix dev)
    : id_(id), model_(std::move(model)), train_(std::move(train)), dev_(std::move(dev)) {
  if (train_.cols != model_.input_dim() || dev_.cols != model_.input_dim()) {
    throw std::invalid_argument("client " + std::to_string(id) +
                                ": feature width differs from model input");
  }
}

LossRecord Client::TrainOnly(const TrainingConfig& config, F1Average average) {
  LossRecord record = TrainSupervised(model_, train_, config);
  record.dev_f1 = DevF1(model_, dev_, average);
  history_.push_back(record);
  return record;
}

ClientRoundReport Client::LocalRound(const FeatureMatrix& public_features,
                                     const TrainingConfig& config, F1Average average) {
  ClientRoundReport report;
  report.client_id = id_;
  report.loss = TrainOnly(config, average);
  report.data_size = train_.rows();
  report.public_logits = PredictLogits(model_, public_features);
  report.dev_f1 = *report.loss.dev_f1;
  return report;
}

double Client::DevScore(const Classifier& model, F1Average average) const {
  return DevF1(model, dev_, average);
}

DistillRecord Client::LocalDistill(const FeatureMatrix& public_features,
                                   const LogitsMatrix& global_logits, const LossSpec& loss,
                                   const TrainingConfig& config) {
  return Distill(model_, public_features, global_logits, loss, config);
}

std::vector<ClientRoundReport> RunLocalPhase(std::vector<Client>& clients,
                                             const FeatureMatrix& public_features,
                                             const ExperimentSpec& spec, int round) {
  std::vector<ClientRoundReport> reports(clients.size());
  ForEachClient(clients.size(), spec.parallel_clients, round, [&](std::size_t k) {
    TrainingConfig config =
        Seeded(spec.local_training,
               DeriveSeed(spec.seed, {kTagLocalTrain, U(round), U(clients[k].id())}));
    config.epochs = spec.local_epochs;
    reports[k] = clients[k].LocalRound(public_features, config, spec.f1_average);
  });
  std::sort(reports.begin(), reports.end(),
            [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
  return reports;
}

ServerRoundResult RunServerPhase(ServerState& server,
                                 std::span<const ClientRoundReport> reports,
                                 const FeatureMatrix& public_features,
                                 const ExperimentSpec& spec, int round,
                                 LlmProvider* provider, bool distill) {
  if (reports.empty()) throw ExperimentError(round, std::nullopt, "no client reports");
  ServerRoundResult result;
  WeightingOutcome outcome;
  try {
    outcome = ComputeWeights(spec.ResolvedStrategy(), spec.strategy, reports, provider);
  } catch (const std::exception& e) {
    throw ExperimentError(round, std::nullopt, e.what());
  }
  result.weights = std::move(outcome.weights);
  result.incident = std::move(outcome.incident);
  result.ensemble = Ensemble(reports, result.weights);
  if (result.ensemble.rows != public_features.rows()) {
    throw ExperimentError(round, std::nullopt, "client logits do not cover the public set");
  }
  if (spec.method == Method::kDsfl && !spec.server_loss_override) {
    // Sharpened probabilities become target logits through their logarithm,
    // which softmax maps back to the same distribution.
    Matrix sharpened = EraSharpen(result.ensemble, spec.strategy.era_temperature);
    result.target = LogitsMatrix(sharpened.rows, sharpened.cols);
    for (std::size_t i = 0; i < sharpened.data.size(); ++i) {
      result.target.data[i] = std::log(std::max(sharpened.data[i], kProbabilityFloor));
    }
  } else {
    result.target = result.ensemble;
  }
  server.weight_history.push_back(result.weights);
  if (distill) {
    TrainingConfig config =
        Seeded(spec.server_training, DeriveSeed(spec.seed, {kTagServerDistill, U(round)}));
    try {
      DistillRecord record = Distill(server.model, public_features, result.target,
                                     spec.ResolvedServerLoss(), config);
      result.distill_loss = record.epoch_losses.back();
    } catch (const std::exception& e) {
      throw ExperimentError(round, std::nullopt, std::string("server: ") + e.what());
    }
    result.global_logits = PredictLogits(server.model, public_features);
    server.global_logits.push_back(*result.global_logits);
  }
  return result;
}

void RunLocalDistill(std::vector<Client>& clients, const LogitsMatrix& global_logits,
                     const FeatureMatrix& public_features, const ExperimentSpec& spec,
                     int round) {
  const LossSpec loss{LossKind::kKl, spec.temperature};
  ForEachClient(clients.size(), spec.parallel_clients, round, [&](std::size_t k) {
    TrainingConfig config =
        Seeded(spec.local_distill,
               DeriveSeed(spec.seed, {kTagLocalDistill, U(round), U(clients[k].id())}));
    clients[k].LocalDistill(public_features, global_logits, loss, config);
  });
}

nlohmann::json RoundTrace::ToJson() const {
  nlohmann::json j = {{"round", round},
                      {"client_l_min", client_l_min},
                      {"client_dev_f1", client_dev_f1},
                      {"client_epoch_losses", client_epoch_losses}};
  j["weights"] = weights ? nlohmann::json(*weights) : nlohmann::json(nullptr);
  j["server_distill_loss"] =
      server_distill_loss ? nlohmann::json(*server_distill_loss) : nlohmann::json(nullptr);
  j["global_f1"] = global_f1 ? nlohmann::json(*global_f1) : nlohmann::json(nullptr);
  j["domain_f1"] = domain_f1;
  if (incident) j["incident"] = incident->ToJson();
  if (selection_dev_f1) j["selection_dev_f1"] = *selection_dev_f1;
  return j;
}

ExperimentResult RunExperiment(const ExperimentSpec& spec, const FederatedDataset& data,
                               LlmProvider* provider, bool track_test_f1,
                               const ExperimentHooks& hooks) {
  spec.Validate(data.num_clients());
  if (spec.method == Method::kCentralized) return RunCentralized(spec, data, track_test_f1);
  if (spec.method == Method::kLocalOnly) return RunLocalOnly(spec, data, track_test_f1);

  OfflineLossProvider offline;
  if (provider == nullptr) provider = &offline;
  std::vector<Client> clients = MakeClients(spec, data);
  ServerState server{Classifier(spec.server_architecture, data.vocabulary.size(),
                                data.num_classes, DeriveSeed(spec.seed, {kTagServerInit})),
                     {},
                     {}};
  ExperimentResult result;
  result.method = spec.method;
  std::optional<Classifier> best;
  double best_score = -1.0;
  for (int t = 1; t <= spec.rounds; ++t) {
    if (hooks.before_local_phase) hooks.before_local_phase(t, clients);
    std::vector<ClientRoundReport> reports =
        RunLocalPhase(clients, data.public_features, spec, t);
    if (hooks.after_local_phase) hooks.after_local_phase(t, clients);

    // One-shot distillation: the server only learns after the last round.
    const bool distill = spec.method != Method::kFedKd || t == spec.rounds;
    ServerRoundResult server_result =
        RunServerPhase(server, reports, data.public_features, spec, t, provider, distill);
    if (hooks.on_server_result) hooks.on_server_result(t, server_result);
    if (server_result.global_logits) {
      RunLocalDistill(clients, *server_result.global_logits, data.public_features, spec, t);
    }

    RoundTrace trace;
    trace.round = t;
    RecordClients(trace, reports);
    trace.weights = server_result.weights.values;
    trace.server_distill_loss = server_result.distill_loss;
    trace.incident = server_result.incident;
    if (track_test_f1 && server_result.distill_loss) {
      FillEvaluation(trace, Evaluate(server.model, data.eval, spec.f1_average));
    }
    if (spec.select_best_by_dev && server_result.distill_loss) {
      double score = 0.0;
      for (const auto& c : clients) score += c.DevScore(server.model, spec.f1_average);
      trace.selection_dev_f1 = score / static_cast<double>(clients.size());
      if (*trace.selection_dev_f1 > best_score) {
        best_score = *trace.selection_dev_f1;
        best = server.model;
        result.selected_round = t;
      }
    }
    result.traces.push_back(std::move(trace));
  }
  result.global_logits = server.global_logits;
  if (best) {
    result.server = std::move(best);
  } else {
    result.server = std::move(server.model);
    result.selected_round = spec.rounds;
  }
  for (const auto& c : clients) result.clients.push_back(c.model());
  return result;
}

EvalReport EvaluateResult(const ExperimentResult& result, const ExperimentSpec& spec,
                          const FederatedDataset& data) {
  EvalReport report = result.server
                          ? Evaluate(*result.server, data.eval, spec.f1_average)
                          : EvaluateMean(result.clients, data.eval, spec.f1_average);
  report.method = std::string(MethodName(result.method));
  report.seed = spec.seed;
  for (const auto& t : result.traces) {
    if (t.global_f1) report.round_f1.push_back(*t.global_f1);
  }
  return report;
}

void WriteTracesJsonl(std::ostream& out, std::span<const RoundTrace> traces) {
  for (const auto& t : traces) out << t.ToJson().dump() << '\n';
}

void WriteWeightsCsv(std::ostream& out, std::span<const RoundTrace> traces, bool header) {
  if (header) out << "round,client,weight\n";
  for (const auto& t : traces) {
    if (!t.weights) continue;
    for (std::size_t k = 0; k < t.weights->size(); ++k) {
      out << t.round << ',' << k << ',' << nlohmann::json((*t.weights)[k]).dump() << '\n';
    }
  }
}

}  // namespace fedistill
