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

#include "fedistill/partition.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "fedistill/random.h"

namespace fedistill {
namespace {

enum SeedTag : std::uint64_t {
  kTagIid = 1,
  kTagDirichlet,
  kTagSubsample,
  kTagDownsample,
  kTagPublic,
  kTagSplit,
  kTagGlobalTest,
};

constexpr int kMaxDirichletAttempts = 1000;

IndexSet LabeledIndices(const Corpus& corpus) {
  IndexSet out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].label) out.push_back(i);
  }
  return out;
}

std::vector<IndexSet> ByLabel(const Corpus& corpus,
                              std::span<const std::size_t> indices) {
  std::vector<IndexSet> by_label(corpus.num_classes());
  for (std::size_t i : indices) {
    const auto& label = corpus[i].label;
    if (!label) {
      throw std::invalid_argument("example " + std::to_string(i) + " is unlabeled");
    }
    by_label[*label].push_back(i);
  }
  return by_label;
}

// Keeps the client single-domain but reshapes its label mix toward a
// Dirichlet(alpha) draw, retaining as many rows as the draw allows.
IndexSet DirichletSubsample(const Corpus& corpus, const IndexSet& client,
                            double alpha, Rng& rng) {
  auto by_label = ByLabel(corpus, client);
  std::vector<std::size_t> present;
  for (std::size_t c = 0; c < by_label.size(); ++c) {
    if (!by_label[c].empty()) present.push_back(c);
  }
  if (present.size() <= 1) return client;
  const auto q = SampleDirichlet(alpha, present.size(), rng);
  double keep = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < present.size(); ++j) {
    if (q[j] > 0.0) {
      keep = std::min(keep, static_cast<double>(by_label[present[j]].size()) / q[j]);
    }
  }
  auto quota = LargestRemainder(q, static_cast<std::size_t>(std::floor(keep)));
  IndexSet out;
  for (std::size_t j = 0; j < present.size(); ++j) {
    auto& rows = by_label[present[j]];
    std::shuffle(rows.begin(), rows.end(), rng);
    const std::size_t take = std::min(quota[j], rows.size());
    out.insert(out.end(), rows.begin(), rows.begin() + take);
  }
  std::sort(out.begin(), out.end());
  return out;
}

ClientSplit SplitClient(IndexSet rows, const std::array<double, 3>& ratio,
                        Rng& rng) {
  std::shuffle(rows.begin(), rows.end(), rng);
  const auto sizes = LargestRemainder(ratio, rows.size());
  ClientSplit split;
  auto it = rows.begin();
  split.train.assign(it, it + sizes[0]);
  it += sizes[0];
  split.dev.assign(it, it + sizes[1]);
  it += sizes[1];
  split.test.assign(it, rows.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.dev.begin(), split.dev.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::set<std::string> TokenSet(const Corpus& corpus,
                               std::span<const std::size_t> rows) {
  std::set<std::string> out;
  for (std::size_t i : rows) {
    for (auto& t : Tokenize(corpus[i].text)) out.insert(std::move(t));
  }
  return out;
}

double Jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& t : a) inter += b.count(t);
  return static_cast<double>(inter) /
         static_cast<double>(a.size() + b.size() - inter);
}

}  // namespace

Regime ParseRegime(std::string_view name) {
  if (name == "iid") return Regime::kIid;
  if (name == "multi_domain") return Regime::kMultiDomain;
  if (name == "label_diverse") return Regime::kLabelDiverse;
  if (name == "multi_domain_non_iid") return Regime::kMultiDomainNonIid;
  throw std::invalid_argument("unknown regime '" + std::string(name) + "'");
}

std::string_view RegimeName(Regime regime) {
  switch (regime) {
    case Regime::kIid: return "iid";
    case Regime::kMultiDomain: return "multi_domain";
    case Regime::kLabelDiverse: return "label_diverse";
    case Regime::kMultiDomainNonIid: return "multi_domain_non_iid";
  }
  return "?";
}

void PartitionSpec::Validate() const {
  if (num_clients < 1) throw std::invalid_argument("num_clients must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  if (!(public_fraction > 0.0 && public_fraction < 1.0)) {
    throw std::invalid_argument("public_fraction must lie in (0, 1)");
  }
  for (double r : split_ratio) {
    if (!(r > 0.0)) throw std::invalid_argument("split_ratio entries must be positive");
  }
  if (!(global_test_alpha > 0.0)) {
    throw std::invalid_argument("global_test_alpha must be > 0");
  }
}

nlohmann::json ToJson(const PartitionSpec& s) {
  return {{"num_clients", s.num_clients},
          {"alpha", s.alpha},
          {"regime", RegimeName(s.regime)},
          {"public_fraction", s.public_fraction},
          {"split_ratio", s.split_ratio},
          {"seed", s.seed},
          {"global_test_alpha", s.global_test_alpha},
          {"global_test_size", s.global_test_size},
          {"downsample_size", s.downsample_size},
          {"min_client_size", s.min_client_size}};
}

PartitionSpec PartitionSpecFromJson(const nlohmann::json& j) {
  PartitionSpec s;
  s.num_clients = j.value("num_clients", s.num_clients);
  s.alpha = j.value("alpha", s.alpha);
  if (j.contains("regime")) s.regime = ParseRegime(j.at("regime").get<std::string>());
  s.public_fraction = j.value("public_fraction", s.public_fraction);
  if (j.contains("split_ratio")) s.split_ratio = j.at("split_ratio").get<std::array<double, 3>>();
  s.seed = j.value("seed", s.seed);
  s.global_test_alpha = j.value("global_test_alpha", s.global_test_alpha);
  s.global_test_size = j.value("global_test_size", s.global_test_size);
  s.downsample_size = j.value("downsample_size", s.downsample_size);
  s.min_client_size = j.value("min_client_size", s.min_client_size);
  return s;
}

void PartitionPlan::Validate() const {
  auto check = [](bool ok, const std::string& what) {
    if (!ok) throw std::logic_error("partition plan invariant violated: " + what);
  };
  check(splits.size() == private_sets.size(), "one split per client");
  std::vector<char> owner(corpus_size, 0);
  auto claim = [&](const IndexSet& set, const std::string& name) {
    for (std::size_t i : set) {
      check(i < corpus_size, name + " index out of range");
      check(!owner[i], name + " overlaps another set");
      owner[i] = 1;
    }
  };
  claim(public_set, "public");
  for (std::size_t k = 0; k < private_sets.size(); ++k) {
    claim(private_sets[k], "private[" + std::to_string(k) + "]");
    const auto& s = splits[k];
    IndexSet joined;
    joined.insert(joined.end(), s.train.begin(), s.train.end());
    joined.insert(joined.end(), s.dev.begin(), s.dev.end());
    joined.insert(joined.end(), s.test.begin(), s.test.end());
    std::sort(joined.begin(), joined.end());
    check(std::adjacent_find(joined.begin(), joined.end()) == joined.end(),
          "client " + std::to_string(k) + " train/dev/test overlap");
    check(joined == private_sets[k],
          "client " + std::to_string(k) + " train/dev/test do not cover private set");
  }
  for (const auto& [domain, set] : per_domain_test) {
    for (std::size_t i : set) check(i < corpus_size, "per-domain test index out of range");
  }
  for (std::size_t i : global_test) check(i < corpus_size, "global test index out of range");
}

nlohmann::json PartitionPlan::ToJson() const {
  nlohmann::json clients = nlohmann::json::array();
  for (std::size_t k = 0; k < private_sets.size(); ++k) {
    clients.push_back({{"private", private_sets[k]},
                       {"train", splits[k].train},
                       {"dev", splits[k].dev},
                       {"test", splits[k].test}});
  }
  return {{"provenance", fedistill::ToJson(spec)},
          {"corpus_size", corpus_size},
          {"public", public_set},
          {"clients", clients},
          {"per_domain_test", per_domain_test},
          {"global_test", global_test}};
}

PartitionPlan PartitionPlan::FromJson(const nlohmann::json& j) {
  PartitionPlan plan;
  plan.spec = PartitionSpecFromJson(j.at("provenance"));
  plan.corpus_size = j.at("corpus_size").get<std::size_t>();
  plan.public_set = j.at("public").get<IndexSet>();
  for (const auto& c : j.at("clients")) {
    plan.private_sets.push_back(c.at("private").get<IndexSet>());
    plan.splits.push_back({c.at("train").get<IndexSet>(), c.at("dev").get<IndexSet>(),
                           c.at("test").get<IndexSet>()});
  }
  plan.per_domain_test = j.at("per_domain_test").get<std::map<std::string, IndexSet>>();
  plan.global_test = j.at("global_test").get<IndexSet>();
  plan.Validate();
  return plan;
}

LabelDistribution ComputeLabelDistribution(const Corpus& corpus,
                                           std::span<const IndexSet> clients) {
  LabelDistribution dist;
  for (const auto& set : clients) {
    std::vector<std::size_t> counts(corpus.num_classes(), 0);
    for (std::size_t i : set) {
      if (corpus[i].label) ++counts[*corpus[i].label];
    }
    const double total = static_cast<double>(set.size());
    std::vector<double> props(counts.size(), 0.0);
    if (total > 0) {
      for (std::size_t c = 0; c < counts.size(); ++c) props[c] = counts[c] / total;
    }
    dist.counts.push_back(std::move(counts));
    dist.proportions.push_back(std::move(props));
  }
  return dist;
}

LabelPartition DirichletLabelPartition(const Corpus& corpus,
                                       std::span<const std::size_t> indices,
                                       int num_clients, double alpha,
                                       std::uint64_t seed,
                                       std::size_t min_client_size) {
  if (num_clients < 1) throw std::invalid_argument("num_clients must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  const auto by_label = ByLabel(corpus, indices);
  const std::size_t k = static_cast<std::size_t>(num_clients);
  if (indices.size() < k * min_client_size) {
    throw std::invalid_argument("too few examples for the requested minimum client size");
  }
  Rng rng(seed);
  for (int attempt = 0; attempt < kMaxDirichletAttempts; ++attempt) {
    std::vector<IndexSet> clients(k);
    for (const auto& rows : by_label) {
      IndexSet shuffled = rows;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      const auto p = SampleDirichlet(alpha, k, rng);
      // Cumulative cut points, as in the usual per-class Dirichlet split.
      std::size_t start = 0;
      double cum = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        cum += p[c];
        std::size_t end = c + 1 == k
                              ? shuffled.size()
                              : static_cast<std::size_t>(std::floor(cum * shuffled.size()));
        end = std::clamp(end, start, shuffled.size());
        clients[c].insert(clients[c].end(), shuffled.begin() + start, shuffled.begin() + end);
        start = end;
      }
    }
    const bool ok = std::all_of(clients.begin(), clients.end(), [&](const IndexSet& s) {
      return s.size() >= min_client_size;
    });
    if (!ok) continue;
    for (auto& s : clients) std::sort(s.begin(), s.end());
    LabelPartition out;
    out.distribution = ComputeLabelDistribution(corpus, clients);
    out.clients = std::move(clients);
    return out;
  }
  throw std::runtime_error("Dirichlet partition could not give every client " +
                           std::to_string(min_client_size) + " examples");
}

LabelPartition DirichletLabelPartition(const Corpus& corpus, int num_clients,
                                       double alpha, std::uint64_t seed,
                                       std::size_t min_client_size) {
  IndexSet all(corpus.size());
  std::iota(all.begin(), all.end(), 0);
  return DirichletLabelPartition(corpus, all, num_clients, alpha, seed, min_client_size);
}

std::vector<IndexSet> AssignDomains(const Corpus& corpus,
                                    std::span<const std::size_t> indices,
                                    int num_clients) {
  std::set<std::string> domains;
  for (std::size_t i : indices) domains.insert(corpus[i].domain);
  if (domains.size() != static_cast<std::size_t>(num_clients)) {
    throw std::invalid_argument("domain count " + std::to_string(domains.size()) +
                                " differs from client count " +
                                std::to_string(num_clients));
  }
  std::map<std::string, std::size_t> slot;
  for (const auto& d : domains) slot.emplace(d, slot.size());
  std::vector<IndexSet> out(domains.size());
  for (std::size_t i : indices) out[slot.at(corpus[i].domain)].push_back(i);
  for (auto& s : out) std::sort(s.begin(), s.end());
  return out;
}

std::vector<IndexSet> AssignDomains(const Corpus& corpus, int num_clients) {
  IndexSet all(corpus.size());
  std::iota(all.begin(), all.end(), 0);
  return AssignDomains(corpus, all, num_clients);
}

PublicSplit SplitPublic(std::span<const IndexSet> clients, double fraction,
                        std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("public_fraction must lie in (0, 1)");
  }
  PublicSplit out;
  for (std::size_t k = 0; k < clients.size(); ++k) {
    IndexSet rows = clients[k];
    const std::size_t n = rows.size();
    const std::size_t n_public = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n))));
    if (n <= n_public) {
      throw std::invalid_argument("client " + std::to_string(k) +
                                  " would be left without private data");
    }
    Rng rng(DeriveSeed(seed, {k}));
    std::shuffle(rows.begin(), rows.end(), rng);
    out.public_set.insert(out.public_set.end(), rows.begin(), rows.begin() + n_public);
    IndexSet priv(rows.begin() + n_public, rows.end());
    std::sort(priv.begin(), priv.end());
    out.private_sets.push_back(std::move(priv));
  }
  std::sort(out.public_set.begin(), out.public_set.end());
  return out;
}

IndexSet DownsamplePreservingLabels(const Corpus& corpus,
                                    std::span<const std::size_t> client,
                                    std::size_t target, std::uint64_t seed) {
  if (target > client.size()) {
    throw std::invalid_argument("downsample target " + std::to_string(target) +
                                " exceeds client size " + std::to_string(client.size()));
  }
  auto by_label = ByLabel(corpus, client);
  std::vector<double> counts;
  for (const auto& rows : by_label) counts.push_back(static_cast<double>(rows.size()));
  const auto quota = LargestRemainder(counts, target);
  Rng rng(seed);
  IndexSet out;
  for (std::size_t c = 0; c < by_label.size(); ++c) {
    auto& rows = by_label[c];
    std::shuffle(rows.begin(), rows.end(), rng);
    out.insert(out.end(), rows.begin(), rows.begin() + quota[c]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

IndexSet BuildGlobalTest(const std::map<std::string, IndexSet>& per_domain_test,
                         double alpha, std::size_t size, std::uint64_t seed) {
  std::size_t pool_total = 0;
  for (const auto& [domain, pool] : per_domain_test) {
    if (pool.empty()) {
      throw std::invalid_argument("per-domain test pool '" + domain + "' is empty");
    }
    pool_total += pool.size();
  }
  if (size > pool_total) {
    throw std::invalid_argument("global test size " + std::to_string(size) +
                                " exceeds the " + std::to_string(pool_total) +
                                " pooled test examples");
  }
  Rng rng(seed);
  const auto p = SampleDirichlet(alpha, per_domain_test.size(), rng);
  auto quota = LargestRemainder(p, size);
  std::vector<std::size_t> cap;
  for (const auto& [domain, pool] : per_domain_test) cap.push_back(pool.size());
  // Push overflow to the domains with the largest Dirichlet share first.
  std::size_t overflow = 0;
  for (std::size_t d = 0; d < quota.size(); ++d) {
    if (quota[d] > cap[d]) {
      overflow += quota[d] - cap[d];
      quota[d] = cap[d];
    }
  }
  std::vector<std::size_t> order(quota.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] > p[b]; });
  for (std::size_t d : order) {
    const std::size_t add = std::min(overflow, cap[d] - quota[d]);
    quota[d] += add;
    overflow -= add;
  }

  IndexSet out;
  std::size_t d = 0;
  for (const auto& [domain, pool] : per_domain_test) {
    IndexSet rows = pool;
    std::shuffle(rows.begin(), rows.end(), rng);
    out.insert(out.end(), rows.begin(), rows.begin() + quota[d]);
    ++d;
  }
  std::sort(out.begin(), out.end());
  return out;
}

PartitionPlan BuildPlan(const Corpus& corpus, const PartitionSpec& spec) {
  spec.Validate();
  const IndexSet labeled = LabeledIndices(corpus);
  const int k = spec.num_clients;

  std::vector<IndexSet> pools;
  switch (spec.regime) {
    case Regime::kIid: {
      IndexSet rows = labeled;
      Rng rng(DeriveSeed(spec.seed, {kTagIid}));
      std::shuffle(rows.begin(), rows.end(), rng);
      pools.resize(k);
      for (std::size_t i = 0; i < rows.size(); ++i) pools[i % k].push_back(rows[i]);
      for (auto& p : pools) std::sort(p.begin(), p.end());
      break;
    }
    case Regime::kMultiDomain:
      pools = AssignDomains(corpus, labeled, k);
      break;
    case Regime::kLabelDiverse:
      pools = DirichletLabelPartition(corpus, labeled, k, spec.alpha,
                                      DeriveSeed(spec.seed, {kTagDirichlet}),
                                      spec.min_client_size)
                  .clients;
      break;
    case Regime::kMultiDomainNonIid: {
      pools = AssignDomains(corpus, labeled, k);
      for (std::size_t c = 0; c < pools.size(); ++c) {
        Rng rng(DeriveSeed(spec.seed, {kTagSubsample, c}));
        IndexSet sub;
        for (int attempt = 0; attempt < kMaxDirichletAttempts; ++attempt) {
          sub = DirichletSubsample(corpus, pools[c], spec.alpha, rng);
          if (sub.size() >= spec.min_client_size) break;
        }
        if (sub.size() < spec.min_client_size) {
          throw std::runtime_error("client " + std::to_string(c) +
                                   " cannot reach the minimum client size");
        }
        pools[c] = std::move(sub);
      }
      break;
    }
  }

  if (spec.downsample_size > 0) {
    for (std::size_t c = 0; c < pools.size(); ++c) {
      const std::size_t target = std::min(spec.downsample_size, pools[c].size());
      pools[c] = DownsamplePreservingLabels(corpus, pools[c], target,
                                            DeriveSeed(spec.seed, {kTagDownsample, c}));
    }
  }

  auto split = SplitPublic(pools, spec.public_fraction, DeriveSeed(spec.seed, {kTagPublic}));

  PartitionPlan plan;
  plan.spec = spec;
  plan.corpus_size = corpus.size();
  plan.public_set = std::move(split.public_set);
  plan.private_sets = std::move(split.private_sets);
  for (std::size_t c = 0; c < plan.private_sets.size(); ++c) {
    Rng rng(DeriveSeed(spec.seed, {kTagSplit, c}));
    plan.splits.push_back(SplitClient(plan.private_sets[c], spec.split_ratio, rng));
    for (std::size_t i : plan.splits.back().test) {
      plan.per_domain_test[corpus[i].domain].push_back(i);
    }
  }
  std::size_t pooled = 0;
  for (auto& [domain, set] : plan.per_domain_test) {
    std::sort(set.begin(), set.end());
    pooled += set.size();
  }
  if (!plan.per_domain_test.empty()) {
    std::size_t size = spec.global_test_size;
    if (size == 0) {
      size = static_cast<std::size_t>(std::lround(
          static_cast<double>(pooled) / static_cast<double>(plan.per_domain_test.size())));
    }
    plan.global_test = BuildGlobalTest(plan.per_domain_test, spec.global_test_alpha, size,
                                       DeriveSeed(spec.seed, {kTagGlobalTest}));
  }
  plan.Validate();
  return plan;
}

nlohmann::json DistributionReport::ToJson() const {
  nlohmann::json tokens = nlohmann::json::array();
  for (const auto& client : top_tokens) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& [tok, count] : client) row.push_back({tok, count});
    tokens.push_back(row);
  }
  return {{"label_histograms", label_histograms},
          {"top_tokens", tokens},
          {"vocabulary_jaccard", vocabulary_jaccard}};
}

DistributionReport MakeDistributionReport(const PartitionPlan& plan,
                                          const Corpus& corpus,
                                          std::size_t top_n) {
  DistributionReport report;
  report.label_histograms =
      ComputeLabelDistribution(corpus, plan.private_sets).counts;
  std::vector<std::set<std::string>> vocab;
  for (const auto& set : plan.private_sets) {
    std::unordered_map<std::string, std::size_t> freq;
    for (std::size_t i : set) {
      for (auto& t : Tokenize(corpus[i].text)) ++freq[std::move(t)];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::set<std::string> tokens;
    for (const auto& [t, n] : ranked) tokens.insert(t);
    if (ranked.size() > top_n) ranked.resize(top_n);
    report.top_tokens.push_back(std::move(ranked));
    vocab.push_back(std::move(tokens));
  }
  const std::size_t k = vocab.size();
  report.vocabulary_jaccard.assign(k, std::vector<double>(k, 1.0));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      const double j = Jaccard(vocab[a], vocab[b]);
      report.vocabulary_jaccard[a][b] = report.vocabulary_jaccard[b][a] = j;
    }
  }
  return report;
}

double TokenJaccard(const Corpus& corpus, std::span<const std::size_t> a,
                    std::span<const std::size_t> b) {
  return Jaccard(TokenSet(corpus, a), TokenSet(corpus, b));
}

}  // namespace fedistill
