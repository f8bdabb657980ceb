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

#include "fedistill/strategy.h"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <sstream>

#include "fedistill/losses.h"
#include "fedistill/random.h"

namespace fedistill {
namespace {

constexpr std::string_view kPromptFraming =
    "You are an expert in federated learning and federated distillation. "
    "Analyze and compute the optimal weight allocation for all clients based "
    "on the following data in a federated distillation scenario. ";

constexpr std::string_view kPromptRequest =
    "Based on these factors, please compute and normalize the weight for each "
    "client to maximize the global model performance. Assign weights to each "
    "client and return the values separated by commas. Do not include any "
    "additional text or calculation details.";

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string JoinNums(std::span<const double> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += Num(values[i]);
  }
  return out;
}

WeightVector Normalize(std::vector<double> raw) {
  const double sum = std::accumulate(raw.begin(), raw.end(), 0.0);
  for (auto& v : raw) v /= sum;
  return WeightVector{std::move(raw)};
}

std::vector<double> MinLosses(std::span<const ClientRoundReport> reports) {
  std::vector<double> out;
  for (const auto& r : reports) out.push_back(r.loss.l_min());
  return out;
}

std::vector<std::size_t> Sizes(std::span<const ClientRoundReport> reports) {
  std::vector<std::size_t> out;
  for (const auto& r : reports) out.push_back(r.data_size);
  return out;
}

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

void WeightVector::Validate() const {
  double sum = 0.0;
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::logic_error("weight outside [0, inf)");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::logic_error("weights do not sum to 1");
}

StrategyKind ParseStrategyKind(std::string_view name) {
  if (name == "uniform") return StrategyKind::kUniform;
  if (name == "data_size") return StrategyKind::kDataSize;
  if (name == "rnwc") return StrategyKind::kRnwc;
  if (name == "enwc") return StrategyKind::kEnwc;
  if (name == "llmwc") return StrategyKind::kLlmwc;
  throw std::invalid_argument("unknown strategy '" + std::string(name) + "'");
}

std::string_view StrategyKindName(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kUniform: return "uniform";
    case StrategyKind::kDataSize: return "data_size";
    case StrategyKind::kRnwc: return "rnwc";
    case StrategyKind::kEnwc: return "enwc";
    case StrategyKind::kLlmwc: return "llmwc";
  }
  return "?";
}

void StrategyConfig::Validate() const {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
  if (!(era_temperature > 0.0)) throw std::invalid_argument("era_temperature must be > 0");
  if (llm_fallback == StrategyKind::kLlmwc) {
    throw std::invalid_argument("the LLM fallback cannot itself be llmwc");
  }
}

nlohmann::json ToJson(const StrategyConfig& c) {
  return {{"kind", StrategyKindName(c.kind)},
          {"beta", c.beta},
          {"era_temperature", c.era_temperature},
          {"llm_fallback", StrategyKindName(c.llm_fallback)}};
}

StrategyConfig StrategyConfigFromJson(const nlohmann::json& j,
                                      const StrategyConfig& defaults) {
  StrategyConfig c = defaults;
  if (j.contains("kind")) c.kind = ParseStrategyKind(j.at("kind").get<std::string>());
  c.beta = j.value("beta", c.beta);
  c.era_temperature = j.value("era_temperature", c.era_temperature);
  if (j.contains("llm_fallback")) {
    c.llm_fallback = ParseStrategyKind(j.at("llm_fallback").get<std::string>());
  }
  return c;
}

WeightVector UniformWeights(std::size_t num_clients) {
  if (num_clients == 0) throw std::invalid_argument("need at least one client");
  return WeightVector{std::vector<double>(num_clients, 1.0 / static_cast<double>(num_clients))};
}

WeightVector DataSizeWeights(std::span<const std::size_t> sizes) {
  if (sizes.empty()) throw std::invalid_argument("need at least one client");
  std::vector<double> raw;
  for (auto s : sizes) {
    if (s == 0) throw std::invalid_argument("client data size must be positive");
    raw.push_back(static_cast<double>(s));
  }
  return Normalize(std::move(raw));
}

WeightVector RnwcWeights(std::span<const double> l_min) {
  if (l_min.empty()) throw std::invalid_argument("need at least one client");
  std::vector<double> raw;
  for (double l : l_min) {
    if (!std::isfinite(l) || l < 0.0) {
      throw std::invalid_argument("RNWC needs finite nonnegative losses");
    }
    raw.push_back(1.0 / std::max(l, kRnwcLossFloor));
  }
  return Normalize(std::move(raw));
}

WeightVector EnwcWeights(std::span<const double> l_min, double beta) {
  if (l_min.empty()) throw std::invalid_argument("need at least one client");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
  for (double l : l_min) {
    if (!std::isfinite(l)) throw std::invalid_argument("ENWC needs finite losses");
  }
  const double lo = *std::min_element(l_min.begin(), l_min.end());
  std::vector<double> raw;
  for (double l : l_min) raw.push_back(std::exp(-beta * (l - lo)));
  return Normalize(std::move(raw));
}

std::string BuildPrompt(std::span<const ClientRoundReport> reports) {
  if (reports.empty()) throw std::invalid_argument("prompt needs at least one client report");
  std::ostringstream out;
  out << kPromptFraming << kPromptInstruction << "\n\nInput:\n";
  for (const auto& r : reports) {
    const auto& z = r.public_logits;
    std::vector<double> mean_logits(z.cols, 0.0);
    double mean_entropy = 0.0;
    for (std::size_t i = 0; i < z.rows; ++i) {
      auto row = z.row(i);
      for (std::size_t c = 0; c < z.cols; ++c) mean_logits[c] += row[c];
      mean_entropy += Entropy(Softmax(row));
    }
    if (z.rows > 0) {
      for (auto& v : mean_logits) v /= static_cast<double>(z.rows);
      mean_entropy /= static_cast<double>(z.rows);
    }
    out << "Client " << r.client_id << ":\n"
        << "  training losses per epoch: " << JoinNums(r.loss.epoch_losses) << "\n"
        << "  minimum training loss: " << Num(r.loss.l_min()) << "\n"
        << "  dev F1: " << Num(r.dev_f1) << "\n"
        << "  private data size: " << r.data_size << "\n"
        << "  mean public logits per class: " << JoinNums(mean_logits) << "\n"
        << "  mean logits entropy: " << Num(mean_entropy) << "\n";
  }
  out << kPromptRequest;
  return out.str();
}

std::vector<double> ParseWeights(std::string_view text, std::size_t num_clients) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    const auto field = Trim(text.substr(start, comma == std::string_view::npos
                                                    ? std::string_view::npos
                                                    : comma - start));
    if (field.empty()) throw WeightParseError("empty weight field");
    const std::string s(field);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE) {
      throw WeightParseError("'" + s + "' is not a decimal number");
    }
    if (!std::isfinite(v)) throw WeightParseError("weight '" + s + "' is not finite");
    if (v < 0.0) throw WeightParseError("weight '" + s + "' is negative");
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.size() != num_clients) {
    throw WeightParseError("expected " + std::to_string(num_clients) + " weights, got " +
                           std::to_string(out.size()));
  }
  return out;
}

nlohmann::json LlmIncident::ToJson() const {
  return {{"reason", reason}, {"response", response}, {"fallback", StrategyKindName(fallback)}};
}

WeightingOutcome LlmWeights(std::span<const ClientRoundReport> reports,
                            LlmProvider& provider, const StrategyConfig& config) {
  std::string response;
  std::string reason;
  try {
    response = provider.Complete(BuildPrompt(reports));
    auto raw = ParseWeights(response, reports.size());
    if (std::accumulate(raw.begin(), raw.end(), 0.0) <= 0.0) {
      throw WeightParseError("weights sum to zero");
    }
    return {Normalize(std::move(raw)), std::nullopt};
  } catch (const ProviderError& e) {
    reason = std::string("provider: ") + e.what();
  } catch (const WeightParseError& e) {
    reason = std::string("parse: ") + e.what();
  }
  auto fallback = ComputeWeights(config.llm_fallback, config, reports, nullptr);
  return {std::move(fallback.weights), LlmIncident{reason, response, config.llm_fallback}};
}

WeightingOutcome ComputeWeights(StrategyKind kind, const StrategyConfig& config,
                                std::span<const ClientRoundReport> reports,
                                LlmProvider* provider) {
  switch (kind) {
    case StrategyKind::kUniform:
      return {UniformWeights(reports.size()), std::nullopt};
    case StrategyKind::kDataSize:
      return {DataSizeWeights(Sizes(reports)), std::nullopt};
    case StrategyKind::kRnwc:
      return {RnwcWeights(MinLosses(reports)), std::nullopt};
    case StrategyKind::kEnwc:
      return {EnwcWeights(MinLosses(reports), config.beta), std::nullopt};
    case StrategyKind::kLlmwc:
      if (provider == nullptr) throw std::invalid_argument("llmwc needs a provider");
      return LlmWeights(reports, *provider, config);
  }
  throw std::logic_error("unhandled strategy");
}

LogitsMatrix Ensemble(std::span<const LogitsMatrix> logits, const WeightVector& w) {
  if (logits.empty()) throw std::invalid_argument("ensemble of zero clients");
  if (logits.size() != w.size()) throw std::invalid_argument("one weight per client required");
  LogitsMatrix out(logits.front().rows, logits.front().cols);
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (!logits[k].same_shape(out)) {
      throw std::invalid_argument("client logits differ in shape");
    }
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += w[k] * logits[k].data[i];
  }
  return out;
}

LogitsMatrix Ensemble(std::span<const ClientRoundReport> reports, const WeightVector& w) {
  std::vector<LogitsMatrix> logits;
  for (const auto& r : reports) logits.push_back(r.public_logits);
  return Ensemble(logits, w);
}

Matrix EraSharpen(const LogitsMatrix& logits, double temperature) {
  Matrix out(logits.rows, logits.cols);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const auto p = Softmax(logits.row(r), temperature);
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace fedistill
