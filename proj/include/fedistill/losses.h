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

#ifndef FEDISTILL_LOSSES_H_
#define FEDISTILL_LOSSES_H_

#include <span>
#include <string_view>
#include <vector>

namespace fedistill {

// Lower clamp applied to probabilities before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

// softmax(z / temperature), max-subtracted.
std::vector<double> Softmax(std::span<const double> logits, double temperature = 1.0);
// log softmax(z / temperature), exact (no clamping).
std::vector<double> LogSoftmax(std::span<const double> logits, double temperature = 1.0);

// -ln p[label], with p[label] clamped at kProbabilityFloor.
double CrossEntropy(std::span<const double> probabilities, int label);
// sum t ln(t / m) with 0 ln 0 = 0 and m clamped at kProbabilityFloor.
double KlDivergence(std::span<const double> target, std::span<const double> model);
// Squared Euclidean distance.
double L2LogitLoss(std::span<const double> a, std::span<const double> b);

// Objectives a classifier can be trained on. All but kCrossEntropy compare
// the model's logits with a row of target logits.
//   kCrossEntropy     -ln softmax(z)[y]
//   kKl               tau^2 KL(softmax(t/tau) || softmax(z/tau))
//   kL2Logit          ||z - t||^2 on raw logits
//   kSoftCrossEntropy -sum softmax(t) ln softmax(z)
//   kSoftmaxL2        ||softmax(z) - softmax(t)||^2
enum class LossKind { kCrossEntropy, kKl, kL2Logit, kSoftCrossEntropy, kSoftmaxL2 };

LossKind ParseLossKind(std::string_view name);
std::string_view LossKindName(LossKind kind);

struct LossSpec {
  LossKind kind = LossKind::kCrossEntropy;
  double temperature = 1.0;

  bool operator==(const LossSpec&) const = default;
};

// Loss of one row as a function of the model logits `z`. `label` is read for
// kCrossEntropy, `target` for the other kinds. When `grad` is non-empty it
// receives dLoss/dz.
double RowLoss(const LossSpec& spec, std::span<const double> z, int label,
               std::span<const double> target, std::span<double> grad);

}  // namespace fedistill

#endif  // FEDISTILL_LOSSES_H_
