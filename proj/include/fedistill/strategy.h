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

#ifndef FEDISTILL_STRATEGY_H_
#define FEDISTILL_STRATEGY_H_

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fedistill/llm_provider.h"
#include "fedistill/matrix.h"
#include "fedistill/model.h"
#include "json.hpp"

namespace fedistill {

// Per-client ensemble weights on the probability simplex.
struct WeightVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t k) const { return values[k]; }
  // Throws std::logic_error unless every entry is >= 0 and the sum is 1
  // within 1e-9.
  void Validate() const;

  bool operator==(const WeightVector&) const = default;
};

enum class StrategyKind { kUniform, kDataSize, kRnwc, kEnwc, kLlmwc };

StrategyKind ParseStrategyKind(std::string_view name);
std::string_view StrategyKindName(StrategyKind kind);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::kEnwc;
  // Sharpness of exponential weighting.
  double beta = 5.0;
  // Softmax temperature of entropy-reduction aggregation.
  double era_temperature = 0.1;
  // Used when the LLM call or its answer is unusable.
  StrategyKind llm_fallback = StrategyKind::kEnwc;

  void Validate() const;
  bool operator==(const StrategyConfig&) const = default;
};

nlohmann::json ToJson(const StrategyConfig& config);
StrategyConfig StrategyConfigFromJson(const nlohmann::json& j,
                                      const StrategyConfig& defaults = {});

// What one client hands the server after its local phase.
struct ClientRoundReport {
  int client_id = 0;
  LossRecord loss;
  std::size_t data_size = 0;
  LogitsMatrix public_logits;
  double dev_f1 = 0.0;

  bool operator==(const ClientRoundReport&) const = default;
};

WeightVector UniformWeights(std::size_t num_clients);
// w_k = |D_k| / sum_j |D_j|. Throws on a zero size.
WeightVector DataSizeWeights(std::span<const std::size_t> sizes);

// Below this, a minimum loss is treated as this value before taking its
// reciprocal.
inline constexpr double kRnwcLossFloor = 1e-8;

// w_k proportional to 1 / l_min_k. Throws on negative or non-finite losses.
WeightVector RnwcWeights(std::span<const double> l_min);
// w_k proportional to exp(-beta * l_min_k), max-shifted.
WeightVector EnwcWeights(std::span<const double> l_min, double beta);

// The sentence the LLM is asked to follow when answering.
inline constexpr std::string_view kPromptInstruction =
    "Return only the numerical values separated by commas, without any "
    "explanation or calculation process.";

// Fixed-template prompt: framing, one statistics block per client (epoch
// losses, minimum loss, dev F1, per-class mean public logits, mean logits
// entropy) and the closing request.
std::string BuildPrompt(std::span<const ClientRoundReport> reports);

class WeightParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exactly `num_clients` comma-separated finite nonnegative decimals.
std::vector<double> ParseWeights(std::string_view text, std::size_t num_clients);

// Record of an LLM weighting round that fell back to another strategy.
struct LlmIncident {
  std::string reason;
  std::string response;
  StrategyKind fallback = StrategyKind::kEnwc;

  nlohmann::json ToJson() const;
  bool operator==(const LlmIncident&) const = default;
};

struct WeightingOutcome {
  WeightVector weights;
  std::optional<LlmIncident> incident;
};

// Prompts `provider`, parses and renormalizes its answer; on any failure uses
// config.llm_fallback and reports the incident.
WeightingOutcome LlmWeights(std::span<const ClientRoundReport> reports,
                            LlmProvider& provider, const StrategyConfig& config);

// Dispatches on `kind`; `provider` is only consulted for kLlmwc.
WeightingOutcome ComputeWeights(StrategyKind kind, const StrategyConfig& config,
                                std::span<const ClientRoundReport> reports,
                                LlmProvider* provider);

// sum_k w_k * logits_k.
LogitsMatrix Ensemble(std::span<const LogitsMatrix> logits, const WeightVector& w);
LogitsMatrix Ensemble(std::span<const ClientRoundReport> reports, const WeightVector& w);

// Rowwise softmax at `temperature`; below 1 it lowers entropy.
Matrix EraSharpen(const LogitsMatrix& logits, double temperature);

}  // namespace fedistill

#endif  // FEDISTILL_STRATEGY_H_
