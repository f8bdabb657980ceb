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
#include <cmath>
#include <random>

#include "fedistill/llm_provider.h"
#include "fedistill/random.h"
#include "gtest/gtest.h"

namespace fedistill {
namespace {

ClientRoundReport Report(int id, double l_min, std::size_t size, LogitsMatrix logits = {}) {
  ClientRoundReport r;
  r.client_id = id;
  r.loss.epoch_losses = {l_min + 0.5, l_min};
  r.data_size = size;
  r.public_logits = logits.rows ? logits : LogitsMatrix(2, 2, 0.0);
  return r;
}

// Independent oracle: normalised exp(-beta * l).
std::vector<double> EnwcOracle(const std::vector<double>& l, double beta) {
  const double lo = *std::min_element(l.begin(), l.end());
  std::vector<double> w;
  double sum = 0.0;
  for (double x : l) sum += std::exp(-beta * (x - lo));
  for (double x : l) w.push_back(std::exp(-beta * (x - lo)) / sum);
  return w;
}

void ExpectSimplex(const WeightVector& w, std::size_t n) {
  ASSERT_EQ(w.size(), n);
  double sum = 0.0;
  for (double v : w.values) {
    ASSERT_TRUE(std::isfinite(v));
    ASSERT_GE(v, 0.0);
    sum += v;
  }
  ASSERT_NEAR(sum, 1.0, 1e-9);
}

TEST(WeightTest, HandValues) {
  const double l[] = {0.5, 1.0};
  auto r = RnwcWeights(l);
  EXPECT_NEAR(r[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r[1], 1.0 / 3.0, 1e-12);
  auto e = EnwcWeights(l, 5.0);
  EXPECT_NEAR(e[0], 0.9241, 1e-4);
  EXPECT_NEAR(e[1], 0.0759, 1e-4);
  EXPECT_NEAR(e[0], 1.0 / (1.0 + std::exp(-2.5)), 1e-12);

  const std::size_t sizes[] = {33, 61, 101, 34, 67};
  auto d = DataSizeWeights(sizes);
  const double expected[] = {0.111486, 0.206081, 0.341216, 0.114865, 0.226351};
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(d[k], expected[k], 1e-6);
  EXPECT_EQ(UniformWeights(4).values, std::vector<double>(4, 0.25));
}

TEST(WeightTest, EqualLossesGiveUniformWeights) {
  const double l[] = {0.3, 0.3, 0.3};
  for (const auto& w : {RnwcWeights(l), EnwcWeights(l, 7.0)}) {
    for (double v : w.values) EXPECT_NEAR(v, 1.0 / 3.0, 1e-12);
  }
}

TEST(WeightTest, RnwcFloorsZeroAndRejectsNegativeLoss) {
  const double zero[] = {0.0, 1.0};
  auto w = RnwcWeights(zero);
  EXPECT_NEAR(w[0], 1.0 / (1.0 + kRnwcLossFloor), 1e-12);
  const double negative[] = {-0.1, 1.0};
  EXPECT_THROW(RnwcWeights(negative), std::invalid_argument);
  EXPECT_THROW(RnwcWeights({}), std::invalid_argument);
  EXPECT_THROW(DataSizeWeights(std::vector<std::size_t>{0, 0}), std::invalid_argument);
}

TEST(WeightTest, FuzzedInputsStayOnTheSimplex) {
  std::mt19937_64 gen(404);
  std::uniform_real_distribution<double> loss(0.0, 50.0);
  std::uniform_real_distribution<double> log_beta(-9.0, 2.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t k = 1 + gen() % 12;
    std::vector<double> l(k);
    std::vector<std::size_t> sizes(k);
    for (std::size_t i = 0; i < k; ++i) {
      l[i] = gen() % 10 == 0 ? 0.0 : loss(gen);
      sizes[i] = 1 + gen() % 10000;
    }
    const double beta = std::pow(10.0, log_beta(gen));
    ExpectSimplex(RnwcWeights(l), k);
    ExpectSimplex(EnwcWeights(l, beta), k);
    ExpectSimplex(DataSizeWeights(sizes), k);
    ExpectSimplex(UniformWeights(k), k);
    const auto oracle = EnwcOracle(l, beta);
    const auto w = EnwcWeights(l, beta);
    for (std::size_t i = 0; i < k; ++i) ASSERT_NEAR(w[i], oracle[i], 1e-9);
  }
}

TEST(WeightTest, EnwcEntropyFallsAsBetaGrows) {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> loss(0.0, 2.0);
  const double betas[] = {1.0, 5.0, 10.0, 15.0, 20.0};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> l(2 + gen() % 8);
    for (auto& x : l) x = loss(gen);
    double previous = INFINITY;
    for (double beta : betas) {
      const double h = Entropy(EnwcWeights(l, beta).values);
      ASSERT_LE(h, previous + 1e-12) << "trial " << trial << " beta " << beta;
      previous = h;
    }
  }
}

TEST(WeightTest, TinyBetaIsNearlyUniform) {
  const double l[] = {0.1, 0.9, 2.5, 0.4};
  for (double v : EnwcWeights(l, 1e-9).values) EXPECT_NEAR(v, 0.25, 1e-4);
}

TEST(EnsembleTest, WeightedSumOfLogits) {
  LogitsMatrix a(1, 2);
  a.data = {1.0, 0.0};
  LogitsMatrix b(1, 2);
  b.data = {0.0, 1.0};
  const LogitsMatrix parts[] = {a, b};
  auto z = Ensemble(parts, WeightVector{{0.25, 0.75}});
  EXPECT_EQ(z.data, (std::vector<double>{0.25, 0.75}));
  LogitsMatrix c(2, 2);
  const LogitsMatrix mismatched[] = {a, c};
  EXPECT_THROW(Ensemble(mismatched, WeightVector{{0.5, 0.5}}), std::invalid_argument);
  EXPECT_THROW(Ensemble(parts, WeightVector{{1.0}}), std::invalid_argument);
}

TEST(EnsembleTest, SingleClientIsReproducedExactly) {
  LogitsMatrix a(3, 2);
  a.data = {0.3, -0.1, 2.0, 1.0, -4.0, 0.5};
  const LogitsMatrix parts[] = {a};
  EXPECT_EQ(Ensemble(parts, UniformWeights(1)), a);
}

TEST(EraTest, SharpensRowsIntoDistributions) {
  LogitsMatrix z(1, 2);
  z.data = {0.2, 0.0};
  auto p = EraSharpen(z, 0.1);
  EXPECT_NEAR(p(0, 0), 1.0 / (1.0 + std::exp(-2.0)), 1e-12);
  EXPECT_NEAR(p(0, 0) + p(0, 1), 1.0, 1e-12);
}

TEST(StrategyConfigTest, NamesAndJson) {
  for (auto k : {StrategyKind::kUniform, StrategyKind::kDataSize, StrategyKind::kRnwc,
                 StrategyKind::kEnwc, StrategyKind::kLlmwc}) {
    EXPECT_EQ(ParseStrategyKind(StrategyKindName(k)), k);
  }
  StrategyConfig c{StrategyKind::kLlmwc, 12.0, 0.5, StrategyKind::kRnwc};
  EXPECT_EQ(StrategyConfigFromJson(ToJson(c)), c);
  c.beta = -1.0;
  EXPECT_ANY_THROW(c.Validate());
  c.beta = 1.0;
  c.llm_fallback = StrategyKind::kLlmwc;
  EXPECT_ANY_THROW(c.Validate());
}

TEST(PromptTest, CarriesInstructionAndStatistics) {
  LogitsMatrix logits(2, 2);
  logits.data = {1.0, 3.0, 0.0, 0.0};
  const ClientRoundReport reports[] = {Report(0, 0.25, 40, logits), Report(1, 0.75, 60)};
  const std::string prompt = BuildPrompt(reports);
  EXPECT_NE(prompt.find(kPromptInstruction), std::string::npos);
  EXPECT_NE(prompt.find("Client 0"), std::string::npos);
  EXPECT_NE(prompt.find("Client 1"), std::string::npos);
  EXPECT_NE(prompt.find("0.25"), std::string::npos);
  EXPECT_NE(prompt.find("private data size: 60"), std::string::npos);
  EXPECT_NE(prompt.find("mean public logits per class: 0.5, 1.5"), std::string::npos);
}

TEST(ParseWeightsTest, AcceptsPlainCommaLists) {
  EXPECT_EQ(ParseWeights("0.2, 0.3,0.5", 3), (std::vector<double>{0.2, 0.3, 0.5}));
  EXPECT_EQ(ParseWeights(" 1 , 2 \n", 2), (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(ParseWeights("1e-1,0", 2), (std::vector<double>{0.1, 0.0}));
}

TEST(ParseWeightsTest, RejectsMalformedAnswers) {
  for (const char* bad : {"", "0.5,", "0.5,,0.5", "0.5; 0.5", "weights: 0.5, 0.5",
                          "-0.1, 1.1", "nan, 1", "inf, 1", "0.5", "0.2, 0.3, 0.5"}) {
    EXPECT_THROW(ParseWeights(bad, 2), WeightParseError) << bad;
  }
}

TEST(LlmWeightsTest, WellFormedResponsesSetTheWeights) {
  const ClientRoundReport reports[] = {Report(0, 0.2, 10), Report(1, 0.4, 10),
                                       Report(2, 0.6, 10)};
  ScriptedProvider provider({"0.5, 0.3, 0.2", "1, 1, 2"});
  StrategyConfig config;
  auto first = ComputeWeights(StrategyKind::kLlmwc, config, reports, &provider);
  EXPECT_FALSE(first.incident);
  EXPECT_EQ(first.weights.values, (std::vector<double>{0.5, 0.3, 0.2}));
  auto second = ComputeWeights(StrategyKind::kLlmwc, config, reports, &provider);
  EXPECT_EQ(second.weights.values, (std::vector<double>{0.25, 0.25, 0.5}));
  ASSERT_EQ(provider.prompts().size(), 2u);
  EXPECT_NE(provider.prompts()[0].find(kPromptInstruction), std::string::npos);
}

TEST(LlmWeightsTest, BadResponsesFallBackAndRecordAnIncident) {
  const ClientRoundReport reports[] = {Report(0, 0.2, 10), Report(1, 0.4, 30)};
  const double l[] = {0.2, 0.4};
  StrategyConfig config;
  config.beta = 3.0;
  ScriptedProvider provider({"I think 0.6 and 0.4", std::nullopt, "0, 0", "0.5, 0.5, 0"});
  for (int call = 0; call < 4; ++call) {
    auto out = ComputeWeights(StrategyKind::kLlmwc, config, reports, &provider);
    ASSERT_TRUE(out.incident) << call;
    EXPECT_EQ(out.weights, EnwcWeights(l, 3.0));
    EXPECT_EQ(out.incident->fallback, StrategyKind::kEnwc);
    const bool provider_failure = call == 1;
    EXPECT_EQ(out.incident->reason.rfind(provider_failure ? "provider: " : "parse: ", 0), 0u)
        << out.incident->reason;
  }
  config.llm_fallback = StrategyKind::kDataSize;
  auto out = ComputeWeights(StrategyKind::kLlmwc, config, reports, &provider);
  ASSERT_TRUE(out.incident);
  EXPECT_EQ(out.incident->reason, "provider: scripted provider exhausted");
  EXPECT_NEAR(out.weights[1], 0.75, 1e-12);
  EXPECT_THROW(ComputeWeights(StrategyKind::kLlmwc, config, reports, nullptr),
               std::invalid_argument);
}

TEST(LlmWeightsTest, OfflineProviderReproducesInverseLossWeights) {
  const ClientRoundReport reports[] = {Report(0, 0.5, 10), Report(1, 1.0, 10)};
  OfflineLossProvider provider;
  auto out = ComputeWeights(StrategyKind::kLlmwc, {}, reports, &provider);
  EXPECT_FALSE(out.incident);
  EXPECT_NEAR(out.weights[0], 2.0 / 3.0, 1e-9);
}

}  // namespace
}  // namespace fedistill
