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

#ifndef FEDISTILL_SWEEP_H_
#define FEDISTILL_SWEEP_H_

#include <ostream>
#include <span>
#include <vector>

#include "fedistill/fed.h"
#include "fedistill/metrics.h"

namespace fedistill {

struct BetaPoint {
  double beta = 0.0;
  EvalReport report;
  std::vector<RoundTrace> traces;
};

// One adafd_enwc experiment per beta with the spec's seeds.
std::vector<BetaPoint> BetaSweep(const ExperimentSpec& spec, const FederatedDataset& data,
                                 std::span<const double> betas);

struct RoundsPoint {
  int rounds = 0;
  EvalReport report;
  std::vector<RoundTrace> traces;
};

// One experiment per round count with the spec's seeds. fedkd distills only
// once, so it has no per-round series and is rejected.
std::vector<RoundsPoint> RoundsSweep(const ExperimentSpec& spec, const FederatedDataset& data,
                                     std::span<const int> round_counts,
                                     LlmProvider* provider = nullptr);

// "beta,round,client,weight" rows.
void WriteBetaWeightsCsv(std::ostream& out, std::span<const BetaPoint> points);
// "method,rounds,f1" rows.
void WriteRoundsCsv(std::ostream& out, std::span<const RoundsPoint> points);

}  // namespace fedistill

#endif  // FEDISTILL_SWEEP_H_
