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

#include "fedistill/losses.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fedistill {

std::vector<double> Softmax(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - mx) / temperature);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

std::vector<double> LogSoftmax(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp((z - mx) / temperature);
  const double lse = std::log(sum);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = (logits[i] - mx) / temperature - lse;
  }
  return out;
}

double CrossEntropy(std::span<const double> probabilities, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probabilities.size()) {
    throw std::out_of_range("label outside the probability row");
  }
  return -std::log(std::max(probabilities[label], kProbabilityFloor));
}

double KlDivergence(std::span<const double> target, std::span<const double> model) {
  if (target.size() != model.size()) throw std::invalid_argument("KL: row size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] > 0.0) {
      kl += target[i] * (std::log(target[i]) - std::log(std::max(model[i], kProbabilityFloor)));
    }
  }
  return std::max(kl, 0.0);
}

double L2LogitLoss(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("L2: row size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

LossKind ParseLossKind(std::string_view name) {
  if (name == "ce") return LossKind::kCrossEntropy;
  if (name == "kl") return LossKind::kKl;
  if (name == "l2") return LossKind::kL2Logit;
  if (name == "ce_soft") return LossKind::kSoftCrossEntropy;
  if (name == "softmax_l2") return LossKind::kSoftmaxL2;
  throw std::invalid_argument("unknown loss '" + std::string(name) + "'");
}

std::string_view LossKindName(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy: return "ce";
    case LossKind::kKl: return "kl";
    case LossKind::kL2Logit: return "l2";
    case LossKind::kSoftCrossEntropy: return "ce_soft";
    case LossKind::kSoftmaxL2: return "softmax_l2";
  }
  return "?";
}

double RowLoss(const LossSpec& spec, std::span<const double> z, int label,
               std::span<const double> target, std::span<double> grad) {
  const std::size_t c = z.size();
  const bool want_grad = !grad.empty();
  if (spec.kind != LossKind::kCrossEntropy && target.size() != c) {
    throw std::invalid_argument("target row size differs from logits");
  }
  switch (spec.kind) {
    case LossKind::kCrossEntropy: {
      if (label < 0 || static_cast<std::size_t>(label) >= c) {
        throw std::out_of_range("label outside [0, C)");
      }
      const auto logp = LogSoftmax(z);
      if (want_grad) {
        for (std::size_t i = 0; i < c; ++i) grad[i] = std::exp(logp[i]);
        grad[label] -= 1.0;
      }
      return -logp[label];
    }
    case LossKind::kKl: {
      const double tau = spec.temperature;
      const auto logq = LogSoftmax(z, tau);
      const auto logp = LogSoftmax(target, tau);
      double kl = 0.0;
      for (std::size_t i = 0; i < c; ++i) {
        const double p = std::exp(logp[i]);
        if (p > 0.0) kl += p * (logp[i] - logq[i]);
        if (want_grad) grad[i] = tau * (std::exp(logq[i]) - p);
      }
      return tau * tau * std::max(kl, 0.0);
    }
    case LossKind::kL2Logit: {
      double s = 0.0;
      for (std::size_t i = 0; i < c; ++i) {
        const double d = z[i] - target[i];
        s += d * d;
        if (want_grad) grad[i] = 2.0 * d;
      }
      return s;
    }
    case LossKind::kSoftCrossEntropy: {
      const auto logq = LogSoftmax(z);
      const auto p = Softmax(target);
      double loss = 0.0;
      for (std::size_t i = 0; i < c; ++i) {
        loss -= p[i] * logq[i];
        if (want_grad) grad[i] = std::exp(logq[i]) - p[i];
      }
      return loss;
    }
    case LossKind::kSoftmaxL2: {
      const auto s = Softmax(z);
      const auto t = Softmax(target);
      double loss = 0.0;
      double dot = 0.0;
      std::vector<double> g(c);
      for (std::size_t i = 0; i < c; ++i) {
        const double d = s[i] - t[i];
        loss += d * d;
        g[i] = 2.0 * d;
        dot += s[i] * g[i];
      }
      if (want_grad) {
        for (std::size_t i = 0; i < c; ++i) grad[i] = s[i] * (g[i] - dot);
      }
      return loss;
    }
  }
  return 0.0;
}

}  // namespace fedistill
