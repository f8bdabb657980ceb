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

#ifndef FEDISTILL_RANDOM_H_
#define FEDISTILL_RANDOM_H_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace fedistill {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
std::uint64_t MixSeed(std::uint64_t base, std::uint64_t tag);
std::uint64_t MixSeed(std::uint64_t base, std::string_view tag);

// Derives an independent stream seed from a base seed and a path of tags,
// e.g. DeriveSeed(seed, {kTagLocalTrain, round, client}).
std::uint64_t DeriveSeed(std::uint64_t base,
                         std::initializer_list<std::uint64_t> tags);

// Draws a point from the symmetric Dirichlet(alpha * 1_k). Sampling is done in
// log space so tiny concentrations (alpha << 1) never produce an all-zero
// draw.
std::vector<double> SampleDirichlet(double alpha, std::size_t k, Rng& rng);

// Apportions `total` units proportionally to `weights` by the largest
// remainder method. Ties on the fractional part go to the larger weight, then
// to the lower index. The result always sums to `total` when any weight is
// positive.
std::vector<std::size_t> LargestRemainder(std::span<const double> weights,
                                          std::size_t total);

// Shannon entropy in nats; zero entries contribute nothing.
double Entropy(std::span<const double> probabilities);

}  // namespace fedistill

#endif  // FEDISTILL_RANDOM_H_
