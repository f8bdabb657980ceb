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

#include "fedistill/metrics.h"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace fedistill {
namespace {

std::string Fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

double ScoreOn(const Classifier& model, const FeatureMatrix& x, int num_classes,
               F1Average average) {
  if (x.rows() == 0) return 0.0;
  return F1Score(PredictLabels(model, x), x.DenseLabels(), num_classes, average);
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::span<const int> predictions,
                                 std::span<const int> gold, int num_classes)
    : num_classes_(num_classes),
      counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
  if (predictions.size() != gold.size()) {
    throw std::invalid_argument("predictions and gold labels differ in length");
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || gold[i] >= num_classes || predictions[i] < 0 ||
        predictions[i] >= num_classes) {
      throw std::out_of_range("label outside [0, C)");
    }
    ++counts_[static_cast<std::size_t>(gold[i]) * num_classes + predictions[i]];
  }
  total_ = gold.size();
}

F1Average ParseF1Average(std::string_view name) {
  if (name == "macro") return F1Average::kMacro;
  if (name == "micro") return F1Average::kMicro;
  throw std::invalid_argument("unknown F1 averaging '" + std::string(name) + "'");
}

std::string_view F1AverageName(F1Average average) {
  return average == F1Average::kMacro ? "macro" : "micro";
}

double MacroF1(std::span<const int> predictions, std::span<const int> gold,
               int num_classes) {
  if (gold.empty()) throw std::invalid_argument("F1 of an empty evaluation set");
  const ConfusionMatrix cm(predictions, gold, num_classes);
  double sum = 0.0;
  int counted = 0;
  for (int c = 0; c < num_classes; ++c) {
    std::size_t tp = cm(c, c), fp = 0, fn = 0;
    for (int o = 0; o < num_classes; ++o) {
      if (o == c) continue;
      fp += cm(o, c);
      fn += cm(c, o);
    }
    if (tp + fp + fn == 0) continue;
    sum += 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    ++counted;
  }
  return counted ? sum / counted : 0.0;
}

double MicroF1(std::span<const int> predictions, std::span<const int> gold,
               int num_classes) {
  if (gold.empty()) throw std::invalid_argument("F1 of an empty evaluation set");
  const ConfusionMatrix cm(predictions, gold, num_classes);
  std::size_t tp = 0;
  for (int c = 0; c < num_classes; ++c) tp += cm(c, c);
  // Single-label: micro precision = micro recall = accuracy.
  return static_cast<double>(tp) / static_cast<double>(cm.total());
}

double F1Score(std::span<const int> predictions, std::span<const int> gold,
               int num_classes, F1Average average) {
  return average == F1Average::kMacro ? MacroF1(predictions, gold, num_classes)
                                      : MicroF1(predictions, gold, num_classes);
}

EvaluationSets BuildEvaluationSets(const PartitionPlan& plan, const Corpus& corpus,
                                   const Vocabulary& vocab, const FeatureOptions& options) {
  EvaluationSets sets;
  sets.num_classes = corpus.num_classes();
  auto featurize = [&](std::span<const std::size_t> rows) {
    return Featurize(corpus.Subset(rows), vocab, options.scheme, options.l2_normalize);
  };
  IndexSet all_tests;
  for (const auto& [domain, rows] : plan.per_domain_test) {
    sets.domain_test.emplace(domain, featurize(rows));
    all_tests.insert(all_tests.end(), rows.begin(), rows.end());
  }
  std::sort(all_tests.begin(), all_tests.end());
  sets.client_specific = featurize(all_tests);
  sets.global_test = featurize(plan.global_test);
  return sets;
}

nlohmann::json EvalReport::ToJson() const {
  return {{"method", method},
          {"domain_f1", domain_f1},
          {"global_f1", global_f1},
          {"client_specific_f1", client_specific_f1},
          {"round_f1", round_f1},
          {"seed", seed},
          {"average", F1AverageName(average)}};
}

EvalReport EvalReport::FromJson(const nlohmann::json& j) {
  EvalReport r;
  r.method = j.at("method").get<std::string>();
  r.domain_f1 = j.at("domain_f1").get<std::map<std::string, double>>();
  r.global_f1 = j.at("global_f1").get<double>();
  r.client_specific_f1 = j.value("client_specific_f1", 0.0);
  r.round_f1 = j.value("round_f1", std::vector<double>{});
  r.seed = j.value("seed", std::uint64_t{0});
  r.average = ParseF1Average(j.value("average", std::string("macro")));
  return r;
}

EvalReport Evaluate(const Classifier& model, const EvaluationSets& sets,
                    F1Average average) {
  EvalReport report;
  report.average = average;
  for (const auto& [domain, x] : sets.domain_test) {
    report.domain_f1[domain] = ScoreOn(model, x, sets.num_classes, average);
  }
  report.client_specific_f1 = ScoreOn(model, sets.client_specific, sets.num_classes, average);
  report.global_f1 = ScoreOn(model, sets.global_test, sets.num_classes, average);
  return report;
}

EvalReport EvaluateMean(std::span<const Classifier> models, const EvaluationSets& sets,
                        F1Average average) {
  if (models.empty()) throw std::invalid_argument("no models to evaluate");
  EvalReport mean;
  mean.average = average;
  for (const auto& m : models) {
    const auto r = Evaluate(m, sets, average);
    for (const auto& [d, f] : r.domain_f1) mean.domain_f1[d] += f / models.size();
    mean.global_f1 += r.global_f1 / models.size();
    mean.client_specific_f1 += r.client_specific_f1 / models.size();
  }
  return mean;
}

void WriteReportCsv(std::ostream& out, std::span<const EvalReport> reports, bool header) {
  if (header) out << "method,testset,f1,seed,round\n";
  for (const auto& r : reports) {
    const std::size_t final_round = r.round_f1.size();
    out << r.method << ",global," << Fixed(r.global_f1) << "," << r.seed << ","
        << final_round << "\n";
    out << r.method << ",client_specific," << Fixed(r.client_specific_f1) << "," << r.seed
        << "," << final_round << "\n";
    for (const auto& [d, f] : r.domain_f1) {
      out << r.method << "," << d << "," << Fixed(f) << "," << r.seed << "," << final_round
          << "\n";
    }
    for (std::size_t t = 0; t < r.round_f1.size(); ++t) {
      out << r.method << ",global_by_round," << Fixed(r.round_f1[t]) << "," << r.seed << ","
          << t + 1 << "\n";
    }
  }
}

}  // namespace fedistill
