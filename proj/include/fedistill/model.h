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

#ifndef FEDISTILL_MODEL_H_
#define FEDISTILL_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fedistill/features.h"
#include "fedistill/losses.h"
#include "fedistill/matrix.h"
#include "json.hpp"

namespace fedistill {

// Layer widths between the sparse input and the class logits. No hidden
// layers means a softmax-linear model.
struct Architecture {
  std::vector<std::size_t> hidden;

  static Architecture Linear() { return {}; }
  static Architecture Mlp(std::vector<std::size_t> hidden) { return {std::move(hidden)}; }

  bool is_linear() const { return hidden.empty(); }
  // "linear", "mlp(16)", "mlp(64,32)".
  std::string ToString() const;
  static Architecture Parse(std::string_view text);

  bool operator==(const Architecture&) const = default;
};

enum class OptimizerKind { kSgd, kAdam };

struct TrainingConfig {
  double learning_rate = 0.1;
  int epochs = 1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kSgd;

  void Validate() const;
  bool operator==(const TrainingConfig&) const = default;
};

nlohmann::json ToJson(const TrainingConfig& config);
TrainingConfig TrainingConfigFromJson(const nlohmann::json& j,
                                      const TrainingConfig& defaults = {});

// Per-epoch mean training loss of one supervised run.
struct LossRecord {
  std::vector<double> epoch_losses;
  std::optional<double> dev_f1;

  double l_min() const;
  nlohmann::json ToJson() const;

  bool operator==(const LossRecord&) const = default;
};

// Per-epoch mean objective of one distillation run.
struct DistillRecord {
  std::vector<double> epoch_losses;

  bool operator==(const DistillRecord&) const = default;
};

// Raised when training produces a non-finite loss or parameter.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A feed-forward classifier over sparse features: tanh hidden layers and a
// linear output producing C logits. Parameters live in one flat vector,
// layer by layer, each layer as a row-major (in x out) weight block followed
// by its bias.
class Classifier {
 public:
  Classifier(Architecture architecture, std::size_t input_dim, int num_classes,
             std::uint64_t init_seed);

  const Architecture& architecture() const { return architecture_; }
  std::size_t input_dim() const { return input_dim_; }
  int num_classes() const { return num_classes_; }

  std::span<const double> parameters() const { return params_; }
  std::span<double> mutable_parameters() { return params_; }
  std::size_t parameter_count() const { return params_.size(); }
  bool AllFinite() const;
  std::uint64_t ParameterHash() const;

  // Logits for every row of `x`.
  LogitsMatrix Forward(const FeatureMatrix& x) const;

  // Mean loss over `rows`. Targets come from `x.labels` for cross-entropy
  // and from the matching rows of `targets` otherwise. When `grad` is not
  // null it receives the mean gradient with respect to parameters().
  double BatchLoss(const FeatureMatrix& x, std::span<const std::size_t> rows,
                   const LossSpec& loss, const LogitsMatrix* targets,
                   std::vector<double>* grad) const;

  // Shape-tagged tensor manifest.
  nlohmann::json ToJson() const;
  static Classifier FromJson(const nlohmann::json& j);

 private:
  friend class Optimizer;

  struct Layer {
    std::size_t in;
    std::size_t out;
    std::size_t weight_offset;
    std::size_t bias_offset;
  };

  // Accumulates scale * dLoss/dparams into `grad`; records first-layer input
  // rows it touches so sparse updates can skip the rest.
  double Accumulate(const FeatureMatrix& x, std::span<const std::size_t> rows,
                    const LossSpec& loss, const LogitsMatrix* targets,
                    std::vector<double>& grad,
                    std::vector<std::uint32_t>* touched) const;
  void ForwardRow(const FeatureMatrix& x, std::size_t r,
                  std::vector<std::vector<double>>& activations) const;
  void CheckInput(const FeatureMatrix& x) const;

  Architecture architecture_;
  std::size_t input_dim_;
  int num_classes_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

// Mini-batch training on labeled rows with cross-entropy. The row order of
// every epoch is a function of config.seed only.
LossRecord TrainSupervised(Classifier& model, const FeatureMatrix& labeled,
                           const TrainingConfig& config);

LogitsMatrix PredictLogits(const Classifier& model, const FeatureMatrix& x);
std::vector<int> PredictLabels(const Classifier& model, const FeatureMatrix& x);

// Fits the model's logits on `features` toward `targets` (row-aligned) under
// `loss`.
DistillRecord Distill(Classifier& model, const FeatureMatrix& features,
                      const LogitsMatrix& targets, const LossSpec& loss,
                      const TrainingConfig& config);

}  // namespace fedistill

#endif  // FEDISTILL_MODEL_H_
