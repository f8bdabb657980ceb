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

#include <cmath>
#include <sstream>

#include "fedistill/random.h"
#include "gtest/gtest.h"
#include "testing.h"

namespace fedistill {
namespace {

class SweepTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fed_ = new testing::SmallFederation(testing::MakeSmallFederation(3));
  }
  static void TearDownTestSuite() { delete fed_; }
  static const FederatedDataset& data() { return fed_->data; }
  static testing::SmallFederation* fed_;
};

testing::SmallFederation* SweepTest::fed_ = nullptr;

TEST_F(SweepTest, TinyBetaGivesNearlyUniformWeights) {
  ExperimentSpec spec = testing::SmallExperiment(Method::kAdafdEnwc);
  const double betas[] = {1e-9};
  auto points = BetaSweep(spec, data(), betas);
  ASSERT_EQ(points.size(), 1u);
  for (const auto& t : points[0].traces) {
    for (double w : *t.weights) EXPECT_NEAR(w, 1.0 / 3.0, 1e-4);
  }
}

TEST_F(SweepTest, SharperBetaNeverRaisesWeightEntropy) {
  ExperimentSpec spec = testing::SmallExperiment(Method::kAdafdEnwc);
  spec.rounds = 3;
  const double betas[] = {1.0, 20.0};
  auto points = BetaSweep(spec, data(), betas);
  ASSERT_EQ(points.size(), 2u);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_LE(Entropy(*points[1].traces[t].weights), Entropy(*points[0].traces[t].weights))
        << "round " << t + 1;
  }
}

TEST_F(SweepTest, BetaSweepNeedsEnwcAndWritesOneRowPerWeight) {
  ExperimentSpec spec = testing::SmallExperiment(Method::kFedAvg);
  const double betas[] = {1.0, 5.0};
  EXPECT_THROW(BetaSweep(spec, data(), betas), std::invalid_argument);
  spec.method = Method::kAdafdEnwc;
  auto points = BetaSweep(spec, data(), betas);
  EXPECT_EQ(points[1].beta, 5.0);
  std::ostringstream out;
  WriteBetaWeightsCsv(out, points);
  const std::string csv = out.str();
  EXPECT_EQ(csv.rfind("beta,round,client,weight\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 2 * 3);
}

TEST_F(SweepTest, RoundsSweepRunsEachCountAsAPrefix) {
  ExperimentSpec spec = testing::SmallExperiment(Method::kAdafdEnwc);
  const int counts[] = {1, 3};
  auto points = RoundsSweep(spec, data(), counts);
  ASSERT_EQ(points.size(), 2u);
  EXPECT_EQ(points[0].rounds, 1);
  EXPECT_EQ(points[0].traces.size(), 1u);
  EXPECT_EQ(points[1].traces.size(), 3u);
  EXPECT_EQ(points[0].traces[0], points[1].traces[0]);
  EXPECT_EQ(points[1].report.round_f1.size(), 3u);
  std::ostringstream out;
  WriteRoundsCsv(out, points);
  EXPECT_EQ(out.str().rfind("method,rounds,f1\nadafd_enwc,1,", 0), 0u);
}

TEST_F(SweepTest, RoundsSweepRejectsOneShotDistillationAndBadCounts) {
  const int counts[] = {1, 5};
  EXPECT_THROW(RoundsSweep(testing::SmallExperiment(Method::kFedKd), data(), counts),
               std::invalid_argument);
  const int bad[] = {0};
  EXPECT_ANY_THROW(RoundsSweep(testing::SmallExperiment(Method::kFedAvg), data(), bad));
}

}  // namespace
}  // namespace fedistill
