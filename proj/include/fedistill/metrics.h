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

#ifndef FEDISTILL_METRICS_H_
#define FEDISTILL_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedistill/corpus.h"
#include "fedistill/features.h"
#include "fedistill/model.h"
#include "fedistill/partition.h"
#include "json.hpp"

namespace fedistill {

// Rows are gold classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix(std::span<const int> predictions, std::span<const int> gold,
                  int num_classes);

  int num_classes() const { return num_classes_; }
  std::size_t operator()(int gold, int predicted) const {
    return counts_[static_cast<std::size_t>(gold) * num_classes_ + predicted];
  }
  std::size_t total() const { return total_; }

 private:
  int num_classes_;
  std::vector<std::size_t> counts_;
  std::size_t total_ = 0;
};

enum class F1Average { kMacro, kMicro };

F1Average ParseF1Average(std::string_view name);
std::string_view F1AverageName(F1Average average);

// Unweighted mean of per-class F1 over the classes that occur in the gold
// labels or the predictions. Throws on empty input.
double MacroF1(std::span<const int> predictions, std::span<const int> gold,
               int num_classes);
double MicroF1(std::span<const int> predictions, std::span<const int> gold,
               int num_classes);
double F1Score(std::span<const int> predictions, std::span<const int> gold,
               int num_classes, F1Average average);

// Featurized held-out sets of a plan.
struct EvaluationSets {
  std::map<std::string, FeatureMatrix> domain_test;
  // Union of the client-specific test sets.
  FeatureMatrix client_specific;
  // Dirichlet-mixed global test set.
  FeatureMatrix global_test;
  int num_classes = 0;
};

EvaluationSets BuildEvaluationSets(const PartitionPlan& plan, const Corpus& corpus,
                                   const Vocabulary& vocab, const FeatureOptions& options);

struct EvalReport {
  std::string method;
  std::map<std::string, double> domain_f1;
  double global_f1 = 0.0;
  double client_specific_f1 = 0.0;
  // Global-test F1 of the evaluated model after every round.
  std::vector<double> round_f1;
  std::uint64_t seed = 0;
  F1Average average = F1Average::kMacro;

  nlohmann::json ToJson() const;
  static EvalReport FromJson(const nlohmann::json& j);
  bool operator==(const EvalReport&) const = default;
};

EvalReport Evaluate(const Classifier& model, const EvaluationSets& sets,
                    F1Average average = F1Average::kMacro);
// Mean of the per-model scores, e.g. for clients trained in isolation.
EvalReport EvaluateMean(std::span<const Classifier> models, const EvaluationSets& sets,
                        F1Average average = F1Average::kMacro);

// Flat rows "method,testset,f1,seed,round": one per test set at the final
// round, then the per-round global series.
void WriteReportCsv(std::ostream& out, std::span<const EvalReport> reports,
                    bool header = true);

}  // namespace fedistill

#endif  // FEDISTILL_METRICS_H_
