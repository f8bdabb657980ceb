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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "fedistill/random.h"

namespace fedistill {

std::string Architecture::ToString() const {
  if (hidden.empty()) return "linear";
  std::string out = "mlp(";
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(hidden[i]);
  }
  return out + ")";
}

Architecture Architecture::Parse(std::string_view text) {
  if (text == "linear" || text == "softmax_linear") return Linear();
  if (text.size() > 5 && text.substr(0, 4) == "mlp(" && text.back() == ')') {
    Architecture arch;
    std::string body(text.substr(4, text.size() - 5));
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::size_t pos = 0;
      unsigned long width = 0;
      try {
        width = std::stoul(item, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || pos != item.size() || width == 0) {
        throw std::invalid_argument("bad layer width in '" + std::string(text) + "'");
      }
      arch.hidden.push_back(width);
    }
    if (arch.hidden.empty()) throw std::invalid_argument("mlp() needs at least one layer");
    return arch;
  }
  throw std::invalid_argument("unknown architecture '" + std::string(text) + "'");
}

void TrainingConfig::Validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
}

nlohmann::json ToJson(const TrainingConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"optimizer", c.optimizer == OptimizerKind::kSgd ? "sgd" : "adam"}};
}

TrainingConfig TrainingConfigFromJson(const nlohmann::json& j,
                                      const TrainingConfig& defaults) {
  TrainingConfig c = defaults;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  if (j.contains("optimizer")) {
    const auto name = j.at("optimizer").get<std::string>();
    if (name == "sgd") {
      c.optimizer = OptimizerKind::kSgd;
    } else if (name == "adam") {
      c.optimizer = OptimizerKind::kAdam;
    } else {
      throw std::invalid_argument("unknown optimizer '" + name + "'");
    }
  }
  return c;
}

double LossRecord::l_min() const {
  if (epoch_losses.empty()) throw std::logic_error("empty loss record");
  return *std::min_element(epoch_losses.begin(), epoch_losses.end());
}

nlohmann::json LossRecord::ToJson() const {
  nlohmann::json j = {{"epoch_losses", epoch_losses}};
  if (!epoch_losses.empty()) j["l_min"] = l_min();
  j["dev_f1"] = dev_f1 ? nlohmann::json(*dev_f1) : nlohmann::json(nullptr);
  return j;
}

Classifier::Classifier(Architecture architecture, std::size_t input_dim,
                       int num_classes, std::uint64_t init_seed)
    : architecture_(std::move(architecture)),
      input_dim_(input_dim),
      num_classes_(num_classes) {
  if (input_dim_ == 0) throw std::invalid_argument("input dimension must be positive");
  if (num_classes_ < 1) throw std::invalid_argument("class count must be positive");
  std::vector<std::size_t> widths{input_dim_};
  widths.insert(widths.end(), architecture_.hidden.begin(), architecture_.hidden.end());
  widths.push_back(static_cast<std::size_t>(num_classes_));
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Layer layer{widths[l], widths[l + 1], offset, offset + widths[l] * widths[l + 1]};
    offset = layer.bias_offset + layer.out;
    layers_.push_back(layer);
  }
  params_.assign(offset, 0.0);
  // Glorot-uniform weights, zero biases.
  Rng rng(init_seed);
  for (const auto& layer : layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < layer.in * layer.out; ++i) {
      params_[layer.weight_offset + i] = dist(rng);
    }
  }
}

bool Classifier::AllFinite() const {
  return std::all_of(params_.begin(), params_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::uint64_t Classifier::ParameterHash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : params_) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void Classifier::CheckInput(const FeatureMatrix& x) const {
  if (x.cols != input_dim_) {
    throw std::invalid_argument("feature dimension " + std::to_string(x.cols) +
                                " differs from model input dimension " +
                                std::to_string(input_dim_));
  }
}

void Classifier::ForwardRow(const FeatureMatrix& x, std::size_t r,
                            std::vector<std::vector<double>>& acts) const {
  acts.resize(layers_.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    auto& out = acts[l];
    out.assign(params_.begin() + layer.bias_offset,
               params_.begin() + layer.bias_offset + layer.out);
    if (l == 0) {
      auto idx = x.row_indices(r);
      auto val = x.row_values(r);
      for (std::size_t n = 0; n < idx.size(); ++n) {
        const double* w = &params_[layer.weight_offset + idx[n] * layer.out];
        for (std::size_t o = 0; o < layer.out; ++o) out[o] += val[n] * w[o];
      }
    } else {
      const auto& in = acts[l - 1];
      for (std::size_t i = 0; i < layer.in; ++i) {
        const double a = in[i];
        if (a == 0.0) continue;
        const double* w = &params_[layer.weight_offset + i * layer.out];
        for (std::size_t o = 0; o < layer.out; ++o) out[o] += a * w[o];
      }
    }
    if (l + 1 < layers_.size()) {
      for (auto& v : out) v = std::tanh(v);
    }
  }
}

LogitsMatrix Classifier::Forward(const FeatureMatrix& x) const {
  CheckInput(x);
  LogitsMatrix out(x.rows(), static_cast<std::size_t>(num_classes_));
  std::vector<std::vector<double>> acts;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    ForwardRow(x, r, acts);
    std::copy(acts.back().begin(), acts.back().end(), out.row(r).begin());
  }
  return out;
}

double Classifier::Accumulate(const FeatureMatrix& x,
                              std::span<const std::size_t> rows,
                              const LossSpec& loss, const LogitsMatrix* targets,
                              std::vector<double>& grad,
                              std::vector<std::uint32_t>* touched) const {
  CheckInput(x);
  if (loss.kind != LossKind::kCrossEntropy) {
    if (targets == nullptr || targets->rows != x.rows() ||
        targets->cols != static_cast<std::size_t>(num_classes_)) {
      throw std::invalid_argument("targets must be a rows x C matrix aligned with the features");
    }
  }
  if (rows.empty()) return 0.0;
  const double scale = 1.0 / static_cast<double>(rows.size());
  std::vector<std::vector<double>> acts;
  std::vector<double> delta(static_cast<std::size_t>(num_classes_));
  std::vector<double> prev;
  double total = 0.0;
  static const std::vector<double> kNoTarget;
  for (std::size_t r : rows) {
    ForwardRow(x, r, acts);
    int label = -1;
    std::span<const double> target = kNoTarget;
    if (loss.kind == LossKind::kCrossEntropy) {
      if (!x.labels[r]) throw std::invalid_argument("cross-entropy on an unlabeled row");
      label = *x.labels[r];
    } else {
      target = targets->row(r);
    }
    delta.resize(static_cast<std::size_t>(num_classes_));
    total += RowLoss(loss, acts.back(), label, target, delta);
    for (auto& d : delta) d *= scale;

    for (std::size_t l = layers_.size(); l-- > 0;) {
      const Layer& layer = layers_[l];
      for (std::size_t o = 0; o < layer.out; ++o) grad[layer.bias_offset + o] += delta[o];
      if (l == 0) {
        auto idx = x.row_indices(r);
        auto val = x.row_values(r);
        for (std::size_t n = 0; n < idx.size(); ++n) {
          double* g = &grad[layer.weight_offset + idx[n] * layer.out];
          for (std::size_t o = 0; o < layer.out; ++o) g[o] += val[n] * delta[o];
          if (touched) touched->push_back(idx[n]);
        }
        break;
      }
      const auto& in = acts[l - 1];
      prev.assign(layer.in, 0.0);
      for (std::size_t i = 0; i < layer.in; ++i) {
        double* g = &grad[layer.weight_offset + i * layer.out];
        const double* w = &params_[layer.weight_offset + i * layer.out];
        double back = 0.0;
        for (std::size_t o = 0; o < layer.out; ++o) {
          g[o] += in[i] * delta[o];
          back += w[o] * delta[o];
        }
        prev[i] = back * (1.0 - in[i] * in[i]);
      }
      delta.swap(prev);
    }
  }
  return total * scale;
}

double Classifier::BatchLoss(const FeatureMatrix& x,
                             std::span<const std::size_t> rows,
                             const LossSpec& loss, const LogitsMatrix* targets,
                             std::vector<double>* grad) const {
  std::vector<double> local;
  std::vector<double>& g = grad ? *grad : local;
  g.assign(params_.size(), 0.0);
  return Accumulate(x, rows, loss, targets, g, nullptr);
}

nlohmann::json Classifier::ToJson() const {
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const std::string prefix = "layer" + std::to_string(l);
    tensors.push_back(
        {{"name", prefix + ".weight"},
         {"shape", {layer.in, layer.out}},
         {"data", std::vector<double>(params_.begin() + layer.weight_offset,
                                      params_.begin() + layer.bias_offset)}});
    tensors.push_back(
        {{"name", prefix + ".bias"},
         {"shape", {layer.out}},
         {"data", std::vector<double>(params_.begin() + layer.bias_offset,
                                      params_.begin() + layer.bias_offset + layer.out)}});
  }
  return {{"architecture", architecture_.ToString()},
          {"input_dim", input_dim_},
          {"num_classes", num_classes_},
          {"tensors", tensors}};
}

Classifier Classifier::FromJson(const nlohmann::json& j) {
  Classifier model(Architecture::Parse(j.at("architecture").get<std::string>()),
                   j.at("input_dim").get<std::size_t>(), j.at("num_classes").get<int>(), 0);
  const auto& tensors = j.at("tensors");
  if (tensors.size() != 2 * model.layers_.size()) {
    throw std::invalid_argument("checkpoint tensor count does not match architecture");
  }
  for (std::size_t l = 0; l < model.layers_.size(); ++l) {
    const Layer& layer = model.layers_[l];
    const auto w = tensors[2 * l].at("data").get<std::vector<double>>();
    const auto b = tensors[2 * l + 1].at("data").get<std::vector<double>>();
    if (tensors[2 * l].at("shape") != nlohmann::json{layer.in, layer.out} ||
        w.size() != layer.in * layer.out || b.size() != layer.out) {
      throw std::invalid_argument("checkpoint tensor shape mismatch in layer " +
                                  std::to_string(l));
    }
    std::copy(w.begin(), w.end(), model.params_.begin() + layer.weight_offset);
    std::copy(b.begin(), b.end(), model.params_.begin() + layer.bias_offset);
  }
  return model;
}

// Applies gradient steps for one training or distillation run. SGD only
// touches the first-layer rows a batch actually used; Adam updates densely.
class Optimizer {
 public:
  Optimizer(Classifier& model, const TrainingConfig& config)
      : model_(model), config_(config), grad_(model.params_.size(), 0.0) {
    if (config_.optimizer == OptimizerKind::kAdam) {
      m_.assign(grad_.size(), 0.0);
      v_.assign(grad_.size(), 0.0);
    }
  }

  double Step(const FeatureMatrix& x, std::span<const std::size_t> rows,
              const LossSpec& loss, const LogitsMatrix* targets) {
    touched_.clear();
    const double value = model_.Accumulate(x, rows, loss, targets, grad_, &touched_);
    if (!std::isfinite(value)) return value;
    std::sort(touched_.begin(), touched_.end());
    touched_.erase(std::unique(touched_.begin(), touched_.end()), touched_.end());
    const auto& first = model_.layers_.front();
    auto& p = model_.params_;
    const double lr = config_.learning_rate;

    if (config_.optimizer == OptimizerKind::kSgd) {
      for (auto j : touched_) {
        const std::size_t base = first.weight_offset + j * first.out;
        for (std::size_t o = 0; o < first.out; ++o) {
          p[base + o] -= lr * grad_[base + o];
          grad_[base + o] = 0.0;
        }
      }
      for (std::size_t i = first.bias_offset; i < p.size(); ++i) {
        p[i] -= lr * grad_[i];
        grad_[i] = 0.0;
      }
      return value;
    }

    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = grad_[i];
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * g;
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * g * g;
      p[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps);
      grad_[i] = 0.0;
    }
    return value;
  }

 private:
  Classifier& model_;
  TrainingConfig config_;
  std::vector<double> grad_;
  std::vector<std::uint32_t> touched_;
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

namespace {

std::vector<double> RunEpochs(Classifier& model, const FeatureMatrix& x,
                              const LossSpec& loss, const LogitsMatrix* targets,
                              const TrainingConfig& config, const char* what) {
  config.Validate();
  std::vector<double> epoch_losses;
  const std::size_t n = x.rows();
  if (n == 0) throw std::invalid_argument(std::string(what) + " on an empty feature matrix");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.seed);
  Optimizer opt(model, config);
  for (int e = 0; e < config.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      std::span<const std::size_t> batch(order.data() + start, end - start);
      const double value = opt.Step(x, batch, loss, targets);
      if (!std::isfinite(value)) {
        throw TrainingError(std::string(what) + ": non-finite loss at epoch " +
                            std::to_string(e + 1) + ", batch starting at row " +
                            std::to_string(start));
      }
      sum += value * static_cast<double>(batch.size());
    }
    if (!model.AllFinite()) {
      throw TrainingError(std::string(what) + ": non-finite parameters after epoch " +
                          std::to_string(e + 1) + " (learning rate " +
                          std::to_string(config.learning_rate) + ")");
    }
    epoch_losses.push_back(sum / static_cast<double>(n));
  }
  return epoch_losses;
}

}  // namespace

LossRecord TrainSupervised(Classifier& model, const FeatureMatrix& labeled,
                           const TrainingConfig& config) {
  if (!labeled.fully_labeled()) {
    throw std::invalid_argument("supervised training needs fully labeled features");
  }
  LossRecord record;
  record.epoch_losses = RunEpochs(model, labeled, {LossKind::kCrossEntropy, 1.0},
                                  nullptr, config, "supervised training");
  return record;
}

LogitsMatrix PredictLogits(const Classifier& model, const FeatureMatrix& x) {
  return model.Forward(x);
}

std::vector<int> PredictLabels(const Classifier& model, const FeatureMatrix& x) {
  const auto logits = model.Forward(x);
  std::vector<int> out(logits.rows);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    auto row = logits.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

DistillRecord Distill(Classifier& model, const FeatureMatrix& features,
                      const LogitsMatrix& targets, const LossSpec& loss,
                      const TrainingConfig& config) {
  if (loss.kind == LossKind::kCrossEntropy) {
    throw std::invalid_argument("distillation needs a soft-target loss");
  }
  if (targets.rows != features.rows()) {
    throw std::invalid_argument("distillation targets are not row-aligned with the features");
  }
  DistillRecord record;
  record.epoch_losses = RunEpochs(model, features, loss, &targets, config, "distillation");
  return record;
}

}  // namespace fedistill
