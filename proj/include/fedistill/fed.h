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

#ifndef FEDISTILL_FED_H_
#define FEDISTILL_FED_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fedistill/corpus.h"
#include "fedistill/features.h"
#include "fedistill/llm_provider.h"
#include "fedistill/metrics.h"
#include "fedistill/model.h"
#include "fedistill/partition.h"
#include "fedistill/strategy.h"
#include "json.hpp"

namespace fedistill {

enum class Method {
  kAdafdRnwc,
  kAdafdEnwc,
  kAdafdLlmwc,
  kFedAvg,
  kDsfl,
  kMhat,
  kFedKd,
  kCentralized,
  kLocalOnly,
};

Method ParseMethod(std::string_view name);
std::string_view MethodName(Method method);
// True for methods that exchange logits through a server.
bool IsFederated(Method method);

// Everything that determines one experiment besides the data.
struct ExperimentSpec {
  Method method = Method::kAdafdEnwc;
  int rounds = 5;
  int local_epochs = 3;
  // One entry for a homogeneous federation, else one per client.
  std::vector<Architecture> client_architectures{Architecture::Linear()};
  Architecture server_architecture = Architecture::Linear();
  StrategyConfig strategy;
  // Replace the method's weighting or server loss; used for cross-method
  // checks.
  std::optional<StrategyKind> strategy_override;
  std::optional<LossKind> server_loss_override;
  // Distillation temperature for KL-based losses.
  double temperature = 1.0;
  // Supervised training; `epochs` is taken from local_epochs.
  TrainingConfig local_training{0.01, 3, 32, 0, OptimizerKind::kAdam};
  // Server distillation over the public set, per round.
  TrainingConfig server_training{0.05, 1, 32, 0, OptimizerKind::kAdam};
  // Client distillation toward the broadcast global logits, per round.
  TrainingConfig local_distill{0.01, 1, 32, 0, OptimizerKind::kAdam};
  std::uint64_t seed = 0;
  bool parallel_clients = false;
  F1Average f1_average = F1Average::kMacro;
  // Keep the evaluated model from the round with the best dev F1 instead of
  // the last one. For federated methods the score is the mean over clients of
  // the central model's F1 on each client's own dev split.
  bool select_best_by_dev = false;

  void Validate(std::size_t num_clients) const;
  const Architecture& client_architecture(std::size_t k) const;
  // Weighting strategy and server objective after applying overrides.
  StrategyKind ResolvedStrategy() const;
  LossSpec ResolvedServerLoss() const;

  bool operator==(const ExperimentSpec&) const = default;
};

nlohmann::json ToJson(const ExperimentSpec& spec);
ExperimentSpec ExperimentSpecFromJson(const nlohmann::json& j,
                                      const ExperimentSpec& defaults = {});

// Features for every party. The vocabulary and idf statistics come from the
// public set only.
struct FederatedDataset {
  Vocabulary vocabulary;
  FeatureMatrix public_features;
  std::vector<FeatureMatrix> client_train;
  std::vector<FeatureMatrix> client_dev;
  EvaluationSets eval;
  int num_classes = 0;

  std::size_t num_clients() const { return client_train.size(); }
};

FederatedDataset BuildFederatedDataset(const Corpus& corpus, const PartitionPlan& plan,
                                       const FeatureOptions& options);

// Raised when a phase fails; carries the round and, for client phases, the
// client id.
class ExperimentError : public std::runtime_error {
 public:
  ExperimentError(int round, std::optional<int> client, const std::string& what);
  int round() const { return round_; }
  std::optional<int> client() const { return client_; }

 private:
  int round_;
  std::optional<int> client_;
};

// A participant owning a model and its private data. Only reports and
// distillation targets cross this boundary.
class Client {
 public:
  Client(int id, Classifier model, FeatureMatrix train, FeatureMatrix dev);

  int id() const { return id_; }
  const Classifier& model() const { return model_; }
  Classifier& mutable_model() { return model_; }
  const std::vector<LossRecord>& history() const { return history_; }
  std::size_t data_size() const { return train_.rows(); }

  // Supervised epochs on the private split, then logits on the public set.
  ClientRoundReport LocalRound(const FeatureMatrix& public_features,
                               const TrainingConfig& config, F1Average average);
  // Supervised epochs only.
  LossRecord TrainOnly(const TrainingConfig& config, F1Average average);
  // F1 of `model` on this client's dev split; 0 when the split is empty.
  double DevScore(const Classifier& model, F1Average average) const;
  DistillRecord LocalDistill(const FeatureMatrix& public_features,
                             const LogitsMatrix& global_logits, const LossSpec& loss,
                             const TrainingConfig& config);

  // Direct access to private data, for instrumentation tests only.
  FeatureMatrix& mutable_private_train() { return train_; }
  FeatureMatrix& mutable_private_dev() { return dev_; }

 private:
  int id_;
  Classifier model_;
  FeatureMatrix train_;
  FeatureMatrix dev_;
  std::vector<LossRecord> history_;
};

struct ServerState {
  Classifier model;
  std::vector<WeightVector> weight_history;
  std::vector<LogitsMatrix> global_logits;
};

struct ServerRoundResult {
  WeightVector weights;
  LogitsMatrix ensemble;
  // What the central model was fitted to (the ensemble, or its sharpened
  // log-probabilities for entropy-reduction aggregation).
  LogitsMatrix target;
  std::optional<double> distill_loss;
  // Central-model logits on the public set after the update; absent when the
  // schedule skipped distillation this round.
  std::optional<LogitsMatrix> global_logits;
  std::optional<LlmIncident> incident;
};

// Trains every client on its private split and collects reports ordered by
// client id, whatever the execution order.
std::vector<ClientRoundReport> RunLocalPhase(std::vector<Client>& clients,
                                             const FeatureMatrix& public_features,
                                             const ExperimentSpec& spec, int round);

// Weights the reports, ensembles their logits, and (when `distill`) fits the
// central model to the method's target on the public set.
ServerRoundResult RunServerPhase(ServerState& server,
                                 std::span<const ClientRoundReport> reports,
                                 const FeatureMatrix& public_features,
                                 const ExperimentSpec& spec, int round,
                                 LlmProvider* provider, bool distill = true);

// Every client distills toward the broadcast global logits with kl(tau).
void RunLocalDistill(std::vector<Client>& clients, const LogitsMatrix& global_logits,
                     const FeatureMatrix& public_features, const ExperimentSpec& spec,
                     int round);

struct RoundTrace {
  int round = 0;
  std::vector<double> client_l_min;
  std::vector<double> client_dev_f1;
  std::vector<std::vector<double>> client_epoch_losses;
  std::optional<std::vector<double>> weights;
  std::optional<double> server_distill_loss;
  // F1 of the evaluated model after this round.
  std::optional<double> global_f1;
  std::map<std::string, double> domain_f1;
  std::optional<LlmIncident> incident;
  // Dev score used for best-round selection, when enabled.
  std::optional<double> selection_dev_f1;

  nlohmann::json ToJson() const;
  bool operator==(const RoundTrace&) const = default;
};

struct ExperimentResult {
  Method method = Method::kAdafdEnwc;
  // Central model; absent for local_only.
  std::optional<Classifier> server;
  std::vector<Classifier> clients;
  std::vector<RoundTrace> traces;
  // Round whose models were kept; the last round unless selecting by dev.
  int selected_round = 0;
  // Global logits broadcast each round, for inspection.
  std::vector<LogitsMatrix> global_logits;
};

// Callbacks around the local phase of every round. Used by instrumentation
// tests that tamper with client state between phases.
struct ExperimentHooks {
  std::function<void(int round, std::vector<Client>&)> before_local_phase;
  std::function<void(int round, std::vector<Client>&)> after_local_phase;
  // Receives every server result as it is produced.
  std::function<void(int round, const ServerRoundResult&)> on_server_result;
};

// Runs the spec's schedule over `rounds`. Per-round test F1 is recorded in
// the traces when `track_test_f1` is set; evaluation never feeds back into
// training.
ExperimentResult RunExperiment(const ExperimentSpec& spec, const FederatedDataset& data,
                               LlmProvider* provider = nullptr, bool track_test_f1 = true,
                               const ExperimentHooks& hooks = {});

// Final evaluation: the central model, or the mean over clients for
// local_only. `round_f1` is filled from the traces.
EvalReport EvaluateResult(const ExperimentResult& result, const ExperimentSpec& spec,
                          const FederatedDataset& data);

void WriteTracesJsonl(std::ostream& out, std::span<const RoundTrace> traces);
// "round,client,weight" rows for heatmaps.
void WriteWeightsCsv(std::ostream& out, std::span<const RoundTrace> traces,
                     bool header = true);

}  // namespace fedistill

#endif  // FEDISTILL_FED_H_
