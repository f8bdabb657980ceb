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

#ifndef FEDISTILL_PARTITION_H_
#define FEDISTILL_PARTITION_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedistill/corpus.h"
#include "json.hpp"

namespace fedistill {

using IndexSet = std::vector<std::size_t>;

// The four data regimes: label skew and/or language-domain skew.
enum class Regime { kIid, kMultiDomain, kLabelDiverse, kMultiDomainNonIid };

Regime ParseRegime(std::string_view name);
std::string_view RegimeName(Regime regime);

struct PartitionSpec {
  int num_clients = 5;
  double alpha = 1.0;
  Regime regime = Regime::kMultiDomainNonIid;
  double public_fraction = 0.2;
  std::array<double, 3> split_ratio{8.0, 1.0, 1.0};
  std::uint64_t seed = 0;
  double global_test_alpha = 0.8;
  // 0 means: mean size of the per-domain test pools.
  std::size_t global_test_size = 0;
  // 0 disables label-preserving downsampling of client pools.
  std::size_t downsample_size = 0;
  // Dirichlet draws are repeated until every client holds at least this many
  // examples.
  std::size_t min_client_size = 10;

  void Validate() const;
  bool operator==(const PartitionSpec&) const = default;
};

nlohmann::json ToJson(const PartitionSpec& spec);
PartitionSpec PartitionSpecFromJson(const nlohmann::json& j);

struct ClientSplit {
  IndexSet train;
  IndexSet dev;
  IndexSet test;

  bool operator==(const ClientSplit&) const = default;
};

// A realized assignment of corpus rows. All sets index the source corpus and
// are sorted ascending.
struct PartitionPlan {
  std::vector<IndexSet> private_sets;
  IndexSet public_set;
  std::vector<ClientSplit> splits;
  std::map<std::string, IndexSet> per_domain_test;
  IndexSet global_test;
  PartitionSpec spec;
  std::size_t corpus_size = 0;

  std::size_t num_clients() const { return private_sets.size(); }
  // Throws std::logic_error naming the first violated invariant.
  void Validate() const;

  nlohmann::json ToJson() const;
  static PartitionPlan FromJson(const nlohmann::json& j);

  bool operator==(const PartitionPlan&) const = default;
};

// Per-client label proportions and counts.
struct LabelDistribution {
  std::vector<std::vector<double>> proportions;
  std::vector<std::vector<std::size_t>> counts;
};

LabelDistribution ComputeLabelDistribution(const Corpus& corpus,
                                           std::span<const IndexSet> clients);

struct LabelPartition {
  std::vector<IndexSet> clients;
  LabelDistribution distribution;
};

// Splits every class across K clients with proportions drawn from
// Dirichlet(alpha * 1_K), one draw per class. The draw is repeated (same
// stream) until each client holds at least `min_client_size` rows.
LabelPartition DirichletLabelPartition(const Corpus& corpus,
                                       std::span<const std::size_t> indices,
                                       int num_clients, double alpha,
                                       std::uint64_t seed,
                                       std::size_t min_client_size = 1);
LabelPartition DirichletLabelPartition(const Corpus& corpus, int num_clients,
                                       double alpha, std::uint64_t seed,
                                       std::size_t min_client_size = 1);

// Client k receives the k-th domain in sorted name order.
std::vector<IndexSet> AssignDomains(const Corpus& corpus,
                                    std::span<const std::size_t> indices,
                                    int num_clients);
std::vector<IndexSet> AssignDomains(const Corpus& corpus, int num_clients);

struct PublicSplit {
  IndexSet public_set;
  std::vector<IndexSet> private_sets;
};

// Moves floor(fraction * n) (at least one) uniformly chosen rows of every
// client into the shared public set.
PublicSplit SplitPublic(std::span<const IndexSet> clients, double fraction,
                        std::uint64_t seed);

// Picks `target` rows whose per-label counts are the largest-remainder
// apportionment of the client's own label counts.
IndexSet DownsamplePreservingLabels(const Corpus& corpus,
                                    std::span<const std::size_t> client,
                                    std::size_t target, std::uint64_t seed);

// Mixes the per-domain pools with Dirichlet(alpha * 1_D) proportions and
// samples without replacement. Overflow past a pool's size is redistributed
// to domains with spare rows.
IndexSet BuildGlobalTest(const std::map<std::string, IndexSet>& per_domain_test,
                         double alpha, std::size_t size, std::uint64_t seed);

PartitionPlan BuildPlan(const Corpus& corpus, const PartitionSpec& spec);

// Numbers behind a feature-distribution plot of the clients' private data.
struct DistributionReport {
  std::vector<std::vector<std::size_t>> label_histograms;
  std::vector<std::vector<std::pair<std::string, std::size_t>>> top_tokens;
  // Jaccard overlap of the clients' private token sets; symmetric, unit
  // diagonal.
  std::vector<std::vector<double>> vocabulary_jaccard;

  nlohmann::json ToJson() const;
};

DistributionReport MakeDistributionReport(const PartitionPlan& plan,
                                          const Corpus& corpus,
                                          std::size_t top_n = 20);

// |A ∩ B| / |A ∪ B| over the token sets of two row groups; 1 for two empty
// sets.
double TokenJaccard(const Corpus& corpus, std::span<const std::size_t> a,
                    std::span<const std::size_t> b);

}  // namespace fedistill

#endif  // FEDISTILL_PARTITION_H_
