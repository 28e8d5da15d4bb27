// Copyright 2026 The FedShield Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDSHIELD_LORA_TRAIN_HPP_
#define FEDSHIELD_LORA_TRAIN_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "fedshield/lora/dataset.hpp"
#include "fedshield/lora/model.hpp"

namespace fedshield::lora {

enum class OptimizerKind { kSgd, kAdam };

inline std::string_view OptimizerName(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

inline OptimizerKind ParseOptimizer(std::string_view s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  Fail(ErrorCode::kParameter, "unknown optimizer '" + std::string(s) + "'");
}

struct LoraUpdate {
  FactorList deltas;  // (A_after - A_before, B_after - B_before) per adapter
  int round = 0;
  int client_id = -1;
};

struct TrainOptions {
  int epochs = 1;
  double lr = 5e-5;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;  // minibatch shuffling
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double divergence_threshold = 1e6;
};

struct LocalTrainResult {
  LoraUpdate update;
  std::vector<double> loss_history;  // one entry per optimizer step
  double mean_loss = 0;              // mean over the final epoch's steps
};

namespace internal {

class Optimizer {
 public:
  Optimizer(const TrainOptions& opts, const FactorList& like)
      : opts_(opts), m_(ZerosLike(like)), v_(ZerosLike(like)) {}

  void Step(AdapterSet& adapters, const FactorList& grads) {
    ++t_;
    const double lr = opts_.lr;
    if (opts_.optimizer == OptimizerKind::kSgd) {
      for (std::size_t l = 0; l < grads.size(); ++l) {
        adapters.adapters[l].a -= lr * grads[l].a;
        adapters.adapters[l].b -= lr * grads[l].b;
      }
      return;
    }
    const double c1 = 1.0 - std::pow(opts_.beta1, t_);
    const double c2 = 1.0 - std::pow(opts_.beta2, t_);
    auto step = [&](Matrix& param, Matrix& m, Matrix& v, const Matrix& g) {
      m = opts_.beta1 * m + (1.0 - opts_.beta1) * g;
      v = opts_.beta2 * v + (1.0 - opts_.beta2) * g.cwiseProduct(g);
      param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + opts_.epsilon);
    };
    for (std::size_t l = 0; l < grads.size(); ++l) {
      step(adapters.adapters[l].a, m_[l].a, v_[l].a, grads[l].a);
      step(adapters.adapters[l].b, m_[l].b, v_[l].b, grads[l].b);
    }
  }

 private:
  TrainOptions opts_;
  FactorList m_, v_;
  int t_ = 0;
};

}  // namespace internal

inline double EvaluateLoss(const Model& model, const AdapterSet& adapters, const ToyDataset& data) {
  return Loss(Forward(model, adapters, data.inputs), data.targets, LossFor(data.task));
}

/// Trains a copy of `start` on `data` and returns the adapter deltas. The
/// base model is taken by const reference and never modified.
inline LocalTrainResult LocalTrain(const Model& model, const AdapterSet& start, const ToyDataset& data,
                                   const TrainOptions& opts) {
  Require(opts.epochs >= 1, ErrorCode::kParameter, "epochs must be >= 1");
  Require(opts.batch_size >= 1, ErrorCode::kParameter, "batch_size must be >= 1");
  Require(opts.lr >= 0 && std::isfinite(opts.lr), ErrorCode::kParameter, "lr must be finite and >= 0");
  ValidateDataset(data);
  RequireCompatible(model, start);
  AdapterSet adapters = start;
  const LossKind loss_kind = LossFor(data.task);
  internal::Optimizer optimizer(opts, adapters.Factors());
  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  LocalTrainResult result;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0;
    std::size_t steps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += opts.batch_size) {
      const std::size_t len = std::min(opts.batch_size, order.size() - begin);
      const ToyDataset batch = data.Rows(std::span<const std::size_t>(order).subspan(begin, len));
      BackwardResult br;
      try {
        br = Backward(model, adapters, batch.inputs, batch.targets, loss_kind);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNumeric) throw;
        throw DivergenceError("non-finite loss during local training", result.loss_history);
      }
      result.loss_history.push_back(br.loss);
      if (br.loss > opts.divergence_threshold) {
        throw DivergenceError("loss " + std::to_string(br.loss) + " exceeds divergence threshold",
                              result.loss_history);
      }
      optimizer.Step(adapters, br.gradients.grads);
      epoch_sum += br.loss;
      ++steps;
    }
    result.mean_loss = epoch_sum / static_cast<double>(steps);
  }
  result.update.deltas.resize(adapters.adapters.size());
  for (std::size_t l = 0; l < adapters.adapters.size(); ++l) {
    result.update.deltas[l].a = adapters.adapters[l].a - start.adapters[l].a;
    result.update.deltas[l].b = adapters.adapters[l].b - start.adapters[l].b;
  }
  return result;
}

}  // namespace fedshield::lora

#endif  // FEDSHIELD_LORA_TRAIN_HPP_
