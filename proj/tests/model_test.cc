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

#include "fedistill/model.h"

#include <cmath>
#include <limits>
#include <random>

#include "gtest/gtest.h"

namespace fedistill {
namespace {

// Dense rows as a CSR matrix.
FeatureMatrix Dense(const std::vector<std::vector<double>>& rows,
                    std::vector<std::optional<int>> labels = {}) {
  FeatureMatrix m;
  m.cols = rows.front().size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (r[c] != 0.0) {
        m.col_idx.push_back(static_cast<std::uint32_t>(c));
        m.values.push_back(r[c]);
      }
    }
    m.row_ptr.push_back(m.col_idx.size());
  }
  m.labels = labels.empty() ? std::vector<std::optional<int>>(rows.size()) : labels;
  return m;
}

FeatureMatrix SeparableToy(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::vector<std::vector<double>> rows;
  std::vector<std::optional<int>> labels;
  for (int i = 0; i < 20; ++i) {
    const int y = i % 2;
    rows.push_back(y == 0 ? std::vector<double>{u(gen), 0.0, 0.1}
                          : std::vector<double>{0.0, u(gen), 0.1});
    labels.push_back(y);
  }
  return Dense(rows, labels);
}

std::vector<std::size_t> AllRows(const FeatureMatrix& x) {
  std::vector<std::size_t> rows(x.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return rows;
}

TEST(ArchitectureTest, ParsesAndPrints) {
  EXPECT_EQ(Architecture::Parse("linear"), Architecture::Linear());
  EXPECT_EQ(Architecture::Parse("mlp(64,32)"), Architecture::Mlp({64, 32}));
  EXPECT_EQ(Architecture::Mlp({16}).ToString(), "mlp(16)");
  EXPECT_THROW(Architecture::Parse("mlp()"), std::invalid_argument);
  EXPECT_THROW(Architecture::Parse("mlp(0)"), std::invalid_argument);
  EXPECT_THROW(Architecture::Parse("cnn"), std::invalid_argument);
}

TEST(ClassifierTest, SeparableToyReachesLowLoss) {
  FeatureMatrix x = SeparableToy(1);
  Classifier model(Architecture::Linear(), 3, 2, 0);
  TrainingConfig config;
  config.learning_rate = 1.0;
  config.epochs = 50;
  config.batch_size = 5;
  LossRecord record = TrainSupervised(model, x, config);
  ASSERT_EQ(record.epoch_losses.size(), 50u);
  EXPECT_LT(record.epoch_losses.back(), 0.1);
  EXPECT_LE(record.l_min(), record.epoch_losses.back());
  EXPECT_EQ(PredictLabels(model, x), x.DenseLabels());
}

TEST(ClassifierTest, OneL2StepMatchesHandGradient) {
  FeatureMatrix x = Dense({{1.0, 0.5}, {0.0, 2.0}, {-1.0, 1.0}});
  LogitsMatrix target(3, 2);
  target.data = {1.0, -1.0, 0.5, 0.0, 0.0, 2.0};
  Classifier model(Architecture::Linear(), 2, 2, 4);
  const std::vector<double> before(model.parameters().begin(), model.parameters().end());
  const LogitsMatrix z = PredictLogits(model, x);

  // Weights are stored input-major, then the bias.
  const double eta = 0.05;
  std::vector<double> expected = before;
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t o = 0; o < 2; ++o) {
      const double g = 2.0 * (z(r, o) - target(r, o)) / 3.0;
      for (std::size_t i = 0; i < x.row_indices(r).size(); ++i) {
        expected[x.row_indices(r)[i] * 2 + o] -= eta * g * x.row_values(r)[i];
      }
      expected[4 + o] -= eta * g;
    }
  }
  TrainingConfig config;
  config.learning_rate = eta;
  config.batch_size = 3;
  Distill(model, x, target, {LossKind::kL2Logit, 1.0}, config);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_NEAR(model.parameters()[i], expected[i], 1e-12) << i;
  }
}

TEST(ClassifierTest, SelfDistillationIsAFixedPoint) {
  FeatureMatrix x = SeparableToy(2);
  for (LossSpec loss : {LossSpec{LossKind::kKl, 1.0}, LossSpec{LossKind::kL2Logit, 1.0},
                        LossSpec{LossKind::kKl, 3.0}}) {
    for (auto arch : {Architecture::Linear(), Architecture::Mlp({5})}) {
      Classifier model(arch, 3, 2, 9);
      const std::vector<double> before(model.parameters().begin(), model.parameters().end());
      TrainingConfig config;
      config.epochs = 3;
      config.learning_rate = 0.5;
      Distill(model, x, PredictLogits(model, x), loss, config);
      for (std::size_t i = 0; i < before.size(); ++i) {
        ASSERT_LT(std::abs(model.parameters()[i] - before[i]), 1e-8);
      }
    }
  }
}

TEST(ClassifierTest, FullBatchDistillLossIsMonotone) {
  FeatureMatrix x = SeparableToy(3);
  LogitsMatrix target(x.rows(), 2);
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& v : target.data) v = n(gen);
  for (LossKind kind : {LossKind::kKl, LossKind::kL2Logit}) {
    Classifier model(Architecture::Linear(), 3, 2, 1);
    TrainingConfig config;
    config.learning_rate = 0.01;
    config.epochs = 30;
    config.batch_size = x.rows();
    auto record = Distill(model, x, target, {kind, 1.0}, config);
    for (std::size_t e = 1; e < record.epoch_losses.size(); ++e) {
      EXPECT_LE(record.epoch_losses[e], record.epoch_losses[e - 1] + 1e-12)
          << LossKindName(kind) << " epoch " << e;
    }
  }
}

TEST(ClassifierTest, MlpGradientMatchesFiniteDifferences) {
  FeatureMatrix x = SeparableToy(4);
  const auto rows = AllRows(x);
  LogitsMatrix target(x.rows(), 2);
  for (std::size_t i = 0; i < target.data.size(); ++i) target.data[i] = std::sin(i * 0.7);
  for (LossSpec loss : {LossSpec{LossKind::kCrossEntropy, 1.0}, LossSpec{LossKind::kKl, 2.0},
                        LossSpec{LossKind::kL2Logit, 1.0}}) {
    Classifier model(Architecture::Mlp({4, 3}), 3, 2, 7);
    std::vector<double> grad;
    model.BatchLoss(x, rows, loss, &target, &grad);
    ASSERT_EQ(grad.size(), model.parameter_count());
    const double h = 1e-5;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      auto p = model.mutable_parameters();
      const double saved = p[i];
      p[i] = saved + h;
      const double up = model.BatchLoss(x, rows, loss, &target, nullptr);
      p[i] = saved - h;
      const double down = model.BatchLoss(x, rows, loss, &target, nullptr);
      p[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      EXPECT_NEAR(numeric, grad[i], 1e-4 * std::max(1.0, std::abs(numeric)))
          << LossKindName(loss.kind) << " param " << i;
    }
  }
}

TEST(ClassifierTest, JsonRoundTripAndHashes) {
  Classifier model(Architecture::Mlp({6}), 4, 3, 11);
  Classifier copy = Classifier::FromJson(model.ToJson());
  EXPECT_EQ(copy.architecture(), model.architecture());
  EXPECT_EQ(copy.ParameterHash(), model.ParameterHash());
  EXPECT_NE(Classifier(Architecture::Mlp({6}), 4, 3, 12).ParameterHash(),
            model.ParameterHash());
  auto j = model.ToJson();
  j["tensors"][0]["shape"][0] = 5;
  EXPECT_ANY_THROW(Classifier::FromJson(j));
}

TEST(ClassifierTest, PredictionLeavesParametersUntouched) {
  FeatureMatrix x = SeparableToy(5);
  Classifier model(Architecture::Mlp({3}), 3, 2, 0);
  const auto hash = model.ParameterHash();
  PredictLogits(model, x);
  PredictLabels(model, x);
  EXPECT_EQ(model.ParameterHash(), hash);
}

TEST(ClassifierTest, RejectsBadInputs) {
  FeatureMatrix x = SeparableToy(6);
  Classifier model(Architecture::Linear(), 4, 2, 0);
  EXPECT_ANY_THROW(PredictLogits(model, x));
  Classifier ok(Architecture::Linear(), 3, 2, 0);
  LogitsMatrix target(x.rows(), 2);
  EXPECT_THROW(Distill(ok, x, target, {LossKind::kCrossEntropy, 1.0}, {}),
               std::invalid_argument);
  LogitsMatrix short_target(1, 2);
  EXPECT_THROW(Distill(ok, x, short_target, {LossKind::kKl, 1.0}, {}), std::invalid_argument);
  TrainingConfig bad;
  bad.learning_rate = 0.0;
  EXPECT_ANY_THROW(TrainSupervised(ok, x, bad));
}

TEST(ClassifierTest, NonFiniteLossRaisesTrainingError) {
  FeatureMatrix x = SeparableToy(7);
  x.values[0] = std::numeric_limits<double>::quiet_NaN();
  Classifier model(Architecture::Linear(), 3, 2, 0);
  TrainingConfig config;
  EXPECT_THROW(TrainSupervised(model, x, config), TrainingError);
}

TEST(TrainingConfigTest, JsonRoundTrip) {
  TrainingConfig c{0.02, 4, 16, 9, OptimizerKind::kAdam};
  EXPECT_EQ(TrainingConfigFromJson(ToJson(c)), c);
  EXPECT_EQ(TrainingConfigFromJson(nlohmann::json::object(), c), c);
}

}  // namespace
}  // namespace fedistill
