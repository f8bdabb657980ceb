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

#include "fedistill/random.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fedistill {

std::uint64_t MixSeed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t MixSeed(std::uint64_t base, std::string_view tag) {
  // FNV-1a over the tag, then mixed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return MixSeed(base, h);
}

std::uint64_t DeriveSeed(std::uint64_t base,
                         std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = MixSeed(base, 0);
  for (auto t : tags) s = MixSeed(s, t);
  return s;
}

std::vector<double> SampleDirichlet(double alpha, std::size_t k, Rng& rng) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("Dirichlet concentration must be positive");
  }
  if (k == 0) return {};
  // Gamma(a) = Gamma(a + 1) * U^(1/a); take logs to survive underflow.
  std::gamma_distribution<double> gamma(alpha + 1.0, 1.0);
  std::uniform_real_distribution<double> uniform(
      std::numeric_limits<double>::min(), 1.0);
  std::vector<double> log_g(k);
  for (auto& v : log_g) {
    const double g = gamma(rng);
    const double u = uniform(rng);
    v = std::log(g) + std::log(u) / alpha;
  }
  const double mx = *std::max_element(log_g.begin(), log_g.end());
  std::vector<double> out(k);
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    out[i] = std::exp(log_g[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

std::vector<std::size_t> LargestRemainder(std::span<const double> weights,
                                          std::size_t total) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> out(n, 0);
  double wsum = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) {
      throw std::invalid_argument("LargestRemainder: weights must be finite and nonnegative");
    }
    wsum += w;
  }
  if (n == 0 || wsum <= 0.0) return out;

  std::vector<double> remainder(n);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double quota = static_cast<double>(total) * weights[i] / wsum;
    out[i] = static_cast<std::size_t>(std::floor(quota));
    remainder[i] = quota - static_cast<double>(out[i]);
    assigned += out[i];
  }
  // Floating point can push the floor sum one past total in pathological
  // cases; trim from the smallest remainders.
  while (assigned > total) {
    std::size_t worst = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (out[i] > 0 && (worst == n || remainder[i] < remainder[worst])) worst = i;
    }
    --out[worst];
    --assigned;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
    if (weights[a] != weights[b]) return weights[a] > weights[b];
    return a < b;
  });
  for (std::size_t j = 0; assigned < total; j = (j + 1) % n) {
    if (weights[order[j]] <= 0.0) continue;
    ++out[order[j]];
    ++assigned;
  }
  return out;
}

double Entropy(std::span<const double> probabilities) {
  double h = 0.0;
  for (double p : probabilities) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace fedistill
