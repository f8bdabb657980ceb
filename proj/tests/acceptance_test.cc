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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fedistill/config.h"
#include "fedistill/fed.h"
#include "fedistill/llm_provider.h"
#include "fedistill/losses.h"
#include "fedistill/partition.h"
#include "fedistill/random.h"
#include "fedistill/strategy.h"
#include "fedistill/sweep.h"
#include "testing.h"

namespace fedistill {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

std::vector<double> Uniform(std::mt19937_64& gen, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(gen);
  return v;
}

bool Simplex(const WeightVector& w) {
  double sum = 0.0;
  for (double v : w.values) {
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) < 1e-9;
}

Outcome WeightStrategies() {
  const double l[] = {0.5, 1.0};
  const auto r = RnwcWeights(l);
  const auto e = EnwcWeights(l, 5.0);
  bool ok = std::abs(r[0] - 2.0 / 3.0) < 1e-12 && std::abs(r[1] - 1.0 / 3.0) < 1e-12 &&
            std::abs(e[0] - 0.9241) < 1e-4 && std::abs(e[1] - 0.0759) < 1e-4;
  std::mt19937_64 gen(1);
  int bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto losses = Uniform(gen, 1 + gen() % 10, 0.0, 20.0);
    const double beta = std::pow(10.0, std::uniform_real_distribution<double>(-9, 2)(gen));
    if (!Simplex(RnwcWeights(losses)) || !Simplex(EnwcWeights(losses, beta))) ++bad;
  }
  return {ok && bad == 0, Fmt("rnwc=[%.6f, %.6f] enwc=[%.4f, %.4f] simplex violations=%d/10000",
                              r[0], r[1], e[0], e[1], bad)};
}

Outcome EnwcEntropy() {
  std::mt19937_64 gen(2);
  const double betas[] = {1, 5, 10, 15, 20};
  int bad = 0;
  for (int i = 0; i < 100; ++i) {
    const auto losses = Uniform(gen, 2 + gen() % 8, 0.0, 3.0);
    double previous = std::numeric_limits<double>::infinity();
    for (double b : betas) {
      const double h = Entropy(EnwcWeights(losses, b).values);
      if (h > previous + 1e-12) ++bad;
      previous = h;
    }
  }
  return {bad == 0, Fmt("increasing steps=%d over 100 loss vectors", bad)};
}

Outcome KlToL2() {
  std::mt19937_64 gen(3);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t c = 2 + gen() % 9;
    auto z = Uniform(gen, c, -1, 1);
    auto t = Uniform(gen, c, -1, 1);
    for (auto* v : {&z, &t}) {
      const double mean = std::accumulate(v->begin(), v->end(), 0.0) / c;
      for (auto& x : *v) x -= mean;
    }
    const double kl = RowLoss({LossKind::kKl, 100.0}, z, -1, t, {});
    const double l2 = L2LogitLoss(z, t) / (2.0 * c);
    worst = std::max(worst, std::abs(kl - l2) / l2);
  }
  return {worst < 0.05, Fmt("max relative error %.5f at tau=100", worst)};
}

Outcome GradientChecks() {
  std::mt19937_64 gen(4);
  const double h = 1e-5;
  std::map<std::string, double> worst;
  for (LossKind kind : {LossKind::kCrossEntropy, LossKind::kKl, LossKind::kL2Logit,
                        LossKind::kSoftCrossEntropy}) {
    const LossSpec spec{kind, kind == LossKind::kKl ? 2.0 : 1.0};
    double& w = worst[std::string(LossKindName(kind))];
    for (int i = 0; i < 50; ++i) {
      const std::size_t c = 2 + gen() % 6;
      auto z = Uniform(gen, c, -3, 3);
      const auto t = Uniform(gen, c, -3, 3);
      const bool ce = kind == LossKind::kCrossEntropy;
      const int label = ce ? static_cast<int>(gen() % c) : -1;
      const std::span<const double> target = ce ? std::span<const double>() : t;
      std::vector<double> grad(c);
      RowLoss(spec, z, label, target, grad);
      for (std::size_t j = 0; j < c; ++j) {
        const double saved = z[j];
        z[j] = saved + h;
        const double up = RowLoss(spec, z, label, target, {});
        z[j] = saved - h;
        const double down = RowLoss(spec, z, label, target, {});
        z[j] = saved;
        const double numeric = (up - down) / (2 * h);
        const double denom = std::max({std::abs(numeric), std::abs(grad[j]), 1e-8});
        w = std::max(w, std::abs(numeric - grad[j]) / denom);
      }
    }
  }
  bool ok = true;
  std::string detail = "max relative error";
  for (const auto& [name, e] : worst) {
    ok = ok && e < 1e-4;
    detail += Fmt(" %s=%.2e", name.c_str(), e);
  }
  return {ok, detail};
}

Outcome PartitionProperties() {
  std::mt19937_64 gen(5);
  int cover_failures = 0;
  std::map<int, Corpus> corpora;
  for (int i = 0; i < 100; ++i) {
    PartitionSpec s;
    s.num_clients = 1 + static_cast<int>(gen() % 5);
    s.alpha = std::pow(10.0, std::uniform_real_distribution<double>(-1, 2)(gen));
    s.regime = static_cast<Regime>(gen() % 3);  // full-cover regimes
    s.public_fraction = std::uniform_real_distribution<double>(0.05, 0.5)(gen);
    s.seed = gen();
    auto [it, fresh] = corpora.try_emplace(s.num_clients);
    if (fresh) {
      SyntheticSpec syn = testing::SmallSynthetic(1);
      syn.num_domains = s.num_clients;
      syn.examples_per_domain = 200;
      it->second = SynthesizeCorpus(syn);
    }
    try {
      PartitionPlan plan = BuildPlan(it->second, s);
      std::vector<int> owner(it->second.size(), 0);
      for (auto j : plan.public_set) ++owner[j];
      for (const auto& p : plan.private_sets) {
        for (auto j : p) ++owner[j];
      }
      if (!std::all_of(owner.begin(), owner.end(), [](int n) { return n == 1; })) {
        ++cover_failures;
      }
    } catch (const std::exception&) {
      ++cover_failures;
    }
  }

  std::vector<int> labels;
  for (int k = 0; k < 4; ++k) labels.insert(labels.end(), 400, k);
  Corpus skewed = testing::LabeledCorpus(labels, 4);
  std::vector<double> entropy;
  for (double alpha : {0.1, 1.0, 10.0, 100.0}) {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto dist = DirichletLabelPartition(skewed, 5, alpha, seed).distribution;
      double h = 0.0;
      for (const auto& p : dist.proportions) h += Entropy(p);
      total += h / dist.proportions.size();
    }
    entropy.push_back(total / 20.0);
  }
  const bool monotone = std::is_sorted(entropy.begin(), entropy.end());

  int downsample_misses = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<int> l;
    const int c = 2 + static_cast<int>(gen() % 4);
    for (int k = 0; k < c; ++k) l.insert(l.end(), 1 + gen() % 200, k);
    Corpus corpus = testing::LabeledCorpus(l, c);
    IndexSet all(corpus.size());
    std::iota(all.begin(), all.end(), 0);
    const std::size_t target = 1 + gen() % corpus.size();
    const auto sub = DownsamplePreservingLabels(corpus, all, target, gen());
    if (std::max(sub.size(), target) - std::min(sub.size(), target) > 1) ++downsample_misses;
  }
  return {cover_failures == 0 && monotone && downsample_misses == 0,
          Fmt("cover failures=%d/100; mean entropy by alpha=[%.3f %.3f %.3f %.3f]; "
              "downsample misses=%d/100",
              cover_failures, entropy[0], entropy[1], entropy[2], entropy[3],
              downsample_misses)};
}

std::string Traces(const ExperimentResult& r) {
  std::ostringstream out;
  WriteTracesJsonl(out, r.traces);
  return out.str();
}

Outcome ProtocolEquivalences(const FederatedDataset& data) {
  ExperimentSpec fedavg = testing::SmallExperiment(Method::kFedAvg, 8);
  fedavg.rounds = 3;
  ExperimentSpec adafd = fedavg;
  adafd.method = Method::kAdafdEnwc;
  adafd.strategy_override = StrategyKind::kUniform;
  adafd.server_loss_override = LossKind::kKl;
  adafd.temperature = 1.0;
  const bool same_as_fedavg = Traces(RunExperiment(fedavg, data)) == Traces(RunExperiment(adafd, data));

  Classifier model(Architecture::Mlp({8}), data.vocabulary.size(), data.num_classes, 2);
  ClientRoundReport report;
  report.loss.epoch_losses = {0.5};
  report.data_size = 1;
  report.public_logits = PredictLogits(model, data.public_features);
  const ClientRoundReport reports[] = {report};
  double delta = 0.0;
  for (Method m : {Method::kAdafdEnwc, Method::kFedAvg}) {
    ServerState server{model, {}, {}};
    ExperimentSpec spec = testing::SmallExperiment(m);
    spec.server_architecture = Architecture::Mlp({8});
    RunServerPhase(server, reports, data.public_features, spec, 1, nullptr);
    for (std::size_t i = 0; i < model.parameter_count(); ++i) {
      delta = std::max(delta, std::abs(server.model.parameters()[i] - model.parameters()[i]));
    }
  }

  ExperimentSpec spec = testing::SmallExperiment(Method::kAdafdEnwc, 9);
  const std::string sequential = Traces(RunExperiment(spec, data));
  spec.parallel_clients = true;
  const bool concurrent_same = Traces(RunExperiment(spec, data)) == sequential;
  return {same_as_fedavg && delta < 1e-8 && concurrent_same,
          Fmt("fedavg traces identical=%s; self-distillation max delta=%.1e; "
              "concurrent==sequential=%s",
              same_as_fedavg ? "yes" : "no", delta, concurrent_same ? "yes" : "no")};
}

const Method kFederated[] = {Method::kAdafdRnwc, Method::kAdafdEnwc, Method::kAdafdLlmwc,
                             Method::kFedAvg,    Method::kDsfl,      Method::kMhat,
                             Method::kFedKd};

struct BenchmarkRun {
  // method name -> global F1 per seed.
  std::map<std::string, std::vector<double>> f1;
  // ENWC global F1 at T = 1, 5 and 10 per seed.
  std::vector<std::map<int, double>> enwc_by_rounds;
};

BenchmarkRun RunBenchmark(int seeds) {
  std::vector<Method> methods(std::begin(kFederated), std::end(kFederated));
  methods.push_back(Method::kCentralized);
  methods.push_back(Method::kLocalOnly);
  BenchmarkRun run;
  for (int seed = 0; seed < seeds; ++seed) {
    const RunConfig config = DeskBenchmarkConfig(methods, static_cast<std::uint64_t>(seed));
    const Corpus corpus = LoadCorpus(config.corpus);
    const PartitionPlan plan = BuildPlan(corpus, config.partition);
    const FederatedDataset data = BuildFederatedDataset(corpus, plan, config.features);
    for (const auto& e : config.experiments) {
      const auto result = RunExperiment(e.spec, data, nullptr, false);
      run.f1[e.name].push_back(EvaluateResult(result, e.spec, data).global_f1);
    }
    ExperimentSpec enwc = config.experiments.front().spec;
    enwc.method = Method::kAdafdEnwc;
    const int counts[] = {1, 5, 10};
    std::map<int, double> by_rounds;
    for (const auto& p : RoundsSweep(enwc, data, counts)) by_rounds[p.rounds] = p.report.global_f1;
    run.enwc_by_rounds.push_back(by_rounds);
    std::fprintf(stderr, "benchmark seed %d done\n", seed);
  }
  return run;
}

double Mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Outcome BenchmarkTrend(const BenchmarkRun& run) {
  const double central = Mean(run.f1.at("centralized"));
  const double local = Mean(run.f1.at("local_only"));
  bool a = true, c = true;
  std::string means;
  for (Method m : kFederated) {
    const std::string name(MethodName(m));
    const double mean = Mean(run.f1.at(name));
    a = a && central >= mean;
    c = c && mean > local;
    means += Fmt(" %s=%.4f", name.c_str(), mean);
  }
  const auto& enwc = run.f1.at("adafd_enwc");
  const auto& avg = run.f1.at("fedavg");
  int wins = 0;
  for (std::size_t s = 0; s < enwc.size(); ++s) wins += enwc[s] > avg[s];
  const bool b = Mean(enwc) >= Mean(avg) - 0.005 && wins >= 3;
  return {a && b && c,
          Fmt("(a)=%s (b)=%s enwc>fedavg on %d/%zu seeds (c)=%s; means: centralized=%.4f "
              "local_only=%.4f",
              a ? "ok" : "no", b ? "ok" : "no", wins, enwc.size(), c ? "ok" : "no", central,
              local) +
              means};
}

Outcome RoundsTrend(const BenchmarkRun& run) {
  int holds = 0;
  std::string detail;
  for (const auto& by : run.enwc_by_rounds) {
    holds += by.at(5) >= by.at(1);
    detail += Fmt(" [T1=%.4f T5=%.4f T10=%.4f]", by.at(1), by.at(5), by.at(10));
  }
  return {holds >= 4, Fmt("T=5 >= T=1 on %d/%zu seeds;", holds, run.enwc_by_rounds.size()) +
                          detail};
}

Outcome LlmMock(const FederatedDataset& data) {
  ExperimentSpec spec = testing::SmallExperiment(Method::kAdafdLlmwc);
  spec.rounds = 4;
  ScriptedProvider provider({"0.2, 0.3, 0.5", "5,0,5", "0.5 0.5 0", std::nullopt});
  const auto result = RunExperiment(spec, data, &provider);
  const auto& t = result.traces;
  const bool exact = *t[0].weights == std::vector<double>{0.2, 0.3, 0.5} &&
                     *t[1].weights == std::vector<double>{0.5, 0.0, 0.5} && !t[0].incident &&
                     !t[1].incident;
  std::vector<double> l2(t[2].client_l_min), l3(t[3].client_l_min);
  const bool fallback = t[2].incident && t[3].incident &&
                        *t[2].weights == EnwcWeights(l2, spec.strategy.beta).values &&
                        *t[3].weights == EnwcWeights(l3, spec.strategy.beta).values &&
                        t[2].incident->reason.rfind("parse: ", 0) == 0 &&
                        t[3].incident->reason.rfind("provider: ", 0) == 0;
  bool instruction = provider.prompts().size() == 4;
  for (const auto& p : provider.prompts()) {
    instruction = instruction && p.find(kPromptInstruction) != std::string::npos;
  }
  return {exact && fallback && instruction,
          Fmt("weights exact=%s; fallback with incident=%s; instruction in every prompt=%s",
              exact ? "yes" : "no", fallback ? "yes" : "no", instruction ? "yes" : "no")};
}

Outcome Privacy(const FederatedDataset& data) {
  ExperimentSpec spec = testing::SmallExperiment(Method::kAdafdEnwc, 5);
  spec.rounds = 3;
  std::vector<std::string> clean, poisoned;
  auto record = [](std::vector<std::string>& sink) {
    return [&sink](int, const ServerRoundResult& r) {
      nlohmann::json j = {{"w", r.weights.values}, {"z", r.ensemble.data},
                          {"t", r.target.data}};
      if (r.global_logits) j["g"] = r.global_logits->data;
      if (r.distill_loss) j["d"] = *r.distill_loss;
      sink.push_back(j.dump());
    };
  };
  ExperimentHooks clean_hooks;
  clean_hooks.on_server_result = record(clean);
  const auto a = RunExperiment(spec, data, nullptr, true, clean_hooks);

  std::vector<std::pair<FeatureMatrix, FeatureMatrix>> saved;
  ExperimentHooks hooks;
  hooks.on_server_result = record(poisoned);
  hooks.after_local_phase = [&](int, std::vector<Client>& clients) {
    saved.clear();
    for (auto& c : clients) {
      saved.emplace_back(c.mutable_private_train(), c.mutable_private_dev());
      for (auto* m : {&c.mutable_private_train(), &c.mutable_private_dev()}) {
        std::fill(m->values.begin(), m->values.end(), std::numeric_limits<double>::quiet_NaN());
        for (auto& label : m->labels) label = 0;
      }
    }
  };
  hooks.before_local_phase = [&](int, std::vector<Client>& clients) {
    for (std::size_t k = 0; k < saved.size(); ++k) {
      clients[k].mutable_private_train() = saved[k].first;
      clients[k].mutable_private_dev() = saved[k].second;
    }
  };
  const auto b = RunExperiment(spec, data, nullptr, true, hooks);
  const bool same = clean == poisoned && Traces(a) == Traces(b) &&
                    a.server->ParameterHash() == b.server->ParameterHash();
  return {same, Fmt("server outputs over %zu rounds bit-identical=%s", clean.size(),
                    same ? "yes" : "no")};
}

int Main() {
  const auto small = testing::MakeSmallFederation(11);
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  };
  report(1, "weight strategies", WeightStrategies);
  report(2, "enwc entropy", EnwcEntropy);
  report(3, "kl to l2 limit", KlToL2);
  report(4, "gradient checks", GradientChecks);
  report(5, "partition properties", PartitionProperties);
  report(6, "protocol equivalences", [&] { return ProtocolEquivalences(small.data); });
  BenchmarkRun bench;
  bool bench_ok = true;
  std::string bench_error;
  try {
    bench = RunBenchmark(5);
  } catch (const std::exception& e) {
    bench_ok = false;
    bench_error = e.what();
  }
  report(7, "benchmark trend", [&]() -> Outcome {
    if (!bench_ok) return {false, "benchmark failed: " + bench_error};
    return BenchmarkTrend(bench);
  });
  report(8, "rounds sweep", [&]() -> Outcome {
    if (!bench_ok) return {false, "benchmark failed: " + bench_error};
    return RoundsTrend(bench);
  });
  report(9, "llm weighting with scripted mock", [&] { return LlmMock(small.data); });
  report(10, "privacy", [&] { return Privacy(small.data); });
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace
}  // namespace fedistill

int main() { return fedistill::Main(); }
