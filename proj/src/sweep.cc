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

#include "fedistill/sweep.h"

#include <stdexcept>
#include <string>

namespace fedistill {

std::vector<BetaPoint> BetaSweep(const ExperimentSpec& spec, const FederatedDataset& data,
                                 std::span<const double> betas) {
  if (spec.method != Method::kAdafdEnwc) {
    throw std::invalid_argument("beta sweep needs method adafd_enwc, got " +
                                std::string(MethodName(spec.method)));
  }
  std::vector<BetaPoint> points;
  for (double beta : betas) {
    ExperimentSpec point = spec;
    point.strategy.beta = beta;
    ExperimentResult result = RunExperiment(point, data);
    points.push_back({beta, EvaluateResult(result, point, data), std::move(result.traces)});
  }
  return points;
}

std::vector<RoundsPoint> RoundsSweep(const ExperimentSpec& spec, const FederatedDataset& data,
                                     std::span<const int> round_counts,
                                     LlmProvider* provider) {
  if (spec.method == Method::kFedKd) {
    throw std::invalid_argument("fedkd performs a single distillation and has no rounds series");
  }
  std::vector<RoundsPoint> points;
  for (int rounds : round_counts) {
    ExperimentSpec point = spec;
    point.rounds = rounds;
    ExperimentResult result = RunExperiment(point, data, provider);
    points.push_back({rounds, EvaluateResult(result, point, data), std::move(result.traces)});
  }
  return points;
}

void WriteBetaWeightsCsv(std::ostream& out, std::span<const BetaPoint> points) {
  out << "beta,round,client,weight\n";
  for (const auto& p : points) {
    for (const auto& t : p.traces) {
      if (!t.weights) continue;
      for (std::size_t k = 0; k < t.weights->size(); ++k) {
        out << nlohmann::json(p.beta).dump() << ',' << t.round << ',' << k << ','
            << nlohmann::json((*t.weights)[k]).dump() << '\n';
      }
    }
  }
}

void WriteRoundsCsv(std::ostream& out, std::span<const RoundsPoint> points) {
  out << "method,rounds,f1\n";
  for (const auto& p : points) {
    out << p.report.method << ',' << p.rounds << ',' << nlohmann::json(p.report.global_f1).dump()
        << '\n';
  }
}

}  // namespace fedistill
