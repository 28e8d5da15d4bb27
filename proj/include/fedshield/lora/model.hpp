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

// Dense network with frozen base weights and one low-rank adapter per layer.
//
// Layer l computes  z = W x + bias + (alpha / r) * (A B)^T x  and applies its
// activation. Batches are row-major (one sample per row), so the layer is
// evaluated as  Z = X W^T + 1 bias^T + (alpha / r) * (X A) B.

#ifndef FEDSHIELD_LORA_MODEL_HPP_
#define FEDSHIELD_LORA_MODEL_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedshield/lora/tensors.hpp"

namespace fedshield::lora {

enum class Activation { kIdentity, kRelu, kTanh };
enum class LossKind { kMse, kCrossEntropy };

inline std::string_view ActivationName(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
  }
  return "identity";
}

inline Activation ParseActivation(std::string_view s) {
  if (s == "identity") return Activation::kIdentity;
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  Fail(ErrorCode::kParameter, "unknown activation '" + std::string(s) + "'");
}

struct DenseLayer {
  Matrix weight;  // d_out x d_in, frozen
  Vector bias;    // d_out, frozen
  Activation activation = Activation::kIdentity;

  int d_in() const { return static_cast<int>(weight.cols()); }
  int d_out() const { return static_cast<int>(weight.rows()); }
};

struct Model {
  std::vector<DenseLayer> layers;

  int input_dim() const { return layers.front().d_in(); }
  int output_dim() const { return layers.back().d_out(); }
};

struct LoraAdapter {
  Matrix a;  // d_in x r
  Matrix b;  // r x d_out
  int rank = 1;
  double alpha = 1.0;

  double scaling() const { return alpha / rank; }
};

struct AdapterSet {
  std::vector<LoraAdapter> adapters;
  bool merged = false;

  FactorList Factors() const {
    FactorList out;
    out.reserve(adapters.size());
    for (const auto& ad : adapters) out.push_back({ad.a, ad.b});
    return out;
  }
};

struct ModelSpec {
  std::vector<int> layer_sizes = {32, 16, 4};
  std::vector<int> ranks = {4, 4};
  double alpha = 8.0;
  Activation hidden_activation = Activation::kTanh;
  Activation output_activation = Activation::kIdentity;
};

/// Builds the frozen base network and fresh adapters. Base weights are
/// N(0, 1/d_in), biases N(0, 0.01); adapter A ~ N(0, 1/r) and B = 0, so the
/// adapters initially contribute nothing.
inline std::pair<Model, AdapterSet> InitModel(const ModelSpec& spec, std::uint64_t seed) {
  Require(spec.layer_sizes.size() >= 2, ErrorCode::kParameter, "need at least one layer");
  const std::size_t n_layers = spec.layer_sizes.size() - 1;
  Require(spec.ranks.size() == n_layers, ErrorCode::kParameter,
          "need one rank per layer (" + std::to_string(n_layers) + ")");
  Require(spec.alpha > 0, ErrorCode::kParameter, "alpha must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Model model;
  AdapterSet adapters;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const int d_in = spec.layer_sizes[l];
    const int d_out = spec.layer_sizes[l + 1];
    const int r = spec.ranks[l];
    Require(d_in >= 1 && d_out >= 1, ErrorCode::kParameter, "layer sizes must be positive");
    if (r < 1 || r > std::min(d_in, d_out)) {
      Fail(ErrorCode::kParameter, "rank " + std::to_string(r) + " outside [1, min(" +
                                      std::to_string(d_in) + ", " + std::to_string(d_out) + ")]");
    }
    DenseLayer layer;
    layer.weight = Matrix(d_out, d_in);
    const double w_std = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = w_std * normal(rng);
    layer.bias = Vector(d_out);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = 0.1 * normal(rng);
    layer.activation = l + 1 == n_layers ? spec.output_activation : spec.hidden_activation;
    model.layers.push_back(std::move(layer));

    LoraAdapter ad;
    ad.rank = r;
    ad.alpha = spec.alpha;
    ad.a = Matrix(d_in, r);
    const double a_std = 1.0 / std::sqrt(static_cast<double>(r));
    for (Eigen::Index i = 0; i < ad.a.size(); ++i) ad.a.data()[i] = a_std * normal(rng);
    ad.b = Matrix::Zero(r, d_out);
    adapters.adapters.push_back(std::move(ad));
  }
  return {std::move(model), std::move(adapters)};
}

inline void RequireCompatible(const Model& model, const AdapterSet& adapters) {
  Require(adapters.adapters.size() == model.layers.size(), ErrorCode::kShape,
          "adapter count does not match layer count");
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    const auto& ad = adapters.adapters[l];
    Require(ad.a.rows() == layer.d_in() && ad.b.cols() == layer.d_out() && ad.a.cols() == ad.rank &&
                ad.b.rows() == ad.rank,
            ErrorCode::kShape, "adapter " + std::to_string(l) + " shape mismatch");
  }
}

namespace internal {

inline void ApplyActivation(Activation act, Matrix& z) {
  switch (act) {
    case Activation::kIdentity: break;
    case Activation::kRelu: z = z.cwiseMax(0.0); break;
    case Activation::kTanh: z = z.array().tanh().matrix(); break;
  }
}

// dL/dz from dL/dh, given z and h = act(z).
inline Matrix ActivationBackward(Activation act, const Matrix& z, const Matrix& h, const Matrix& dh) {
  switch (act) {
    case Activation::kIdentity: return dh;
    case Activation::kRelu: return (z.array() > 0.0).cast<double>().cwiseProduct(dh.array()).matrix();
    case Activation::kTanh: return ((1.0 - h.array().square()) * dh.array()).matrix();
  }
  return dh;
}

}  // namespace internal

struct ForwardCache {
  std::vector<Matrix> inputs;  // X_l
  std::vector<Matrix> xa;      // X_l A_l
  std::vector<Matrix> pre;     // Z_l
  std::vector<Matrix> post;    // act(Z_l)
};

inline Matrix Forward(const Model& model, const AdapterSet* adapters, const Matrix& x,
                      ForwardCache* cache = nullptr) {
  Require(!model.layers.empty(), ErrorCode::kShape, "empty model");
  Require(x.cols() == model.input_dim(), ErrorCode::kShape,
          "input width " + std::to_string(x.cols()) + " != " + std::to_string(model.input_dim()));
  if (adapters != nullptr) RequireCompatible(model, *adapters);
  Matrix h = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    Matrix z = h * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    Matrix xa;
    if (adapters != nullptr) {
      const auto& ad = adapters->adapters[l];
      xa = h * ad.a;
      z.noalias() += ad.scaling() * (xa * ad.b);
    }
    Matrix out = z;
    internal::ApplyActivation(layer.activation, out);
    if (cache != nullptr) {
      cache->inputs.push_back(std::move(h));
      cache->xa.push_back(std::move(xa));
      cache->pre.push_back(std::move(z));
      cache->post.push_back(out);
    }
    h = std::move(out);
  }
  return h;
}

inline Matrix Forward(const Model& model, const AdapterSet& adapters, const Matrix& x) {
  return Forward(model, &adapters, x);
}

// Base network only.
inline Matrix ForwardBase(const Model& model, const Matrix& x) { return Forward(model, nullptr, x); }

/// Mean loss over the batch. MSE averages over every output entry; cross
/// entropy applies a softmax to the outputs and takes one-hot (or soft)
/// target rows.
inline double Loss(const Matrix& outputs, const Matrix& targets, LossKind kind, Matrix* d_outputs = nullptr) {
  Require(outputs.rows() == targets.rows() && outputs.cols() == targets.cols(), ErrorCode::kShape,
          "target shape mismatch");
  Require(outputs.rows() > 0, ErrorCode::kShape, "empty batch");
  const double n = static_cast<double>(outputs.rows());
  double loss = 0;
  if (kind == LossKind::kMse) {
    const Matrix diff = outputs - targets;
    const double count = static_cast<double>(diff.size());
    loss = diff.squaredNorm() / count;
    if (d_outputs != nullptr) *d_outputs = (2.0 / count) * diff;
  } else {
    Matrix probs(outputs.rows(), outputs.cols());
    for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
      const double max = outputs.row(i).maxCoeff();
      const Eigen::RowVectorXd e = (outputs.row(i).array() - max).exp().matrix();
      const double sum = e.sum();
      probs.row(i) = e / sum;
      const double log_sum = std::log(sum) + max;
      for (Eigen::Index k = 0; k < outputs.cols(); ++k) {
        if (targets(i, k) != 0.0) loss -= targets(i, k) * (outputs(i, k) - log_sum);
      }
    }
    loss /= n;
    if (d_outputs != nullptr) *d_outputs = (probs - targets) / n;
  }
  if (!std::isfinite(loss)) Fail(ErrorCode::kNumeric, "non-finite loss");
  return loss;
}

struct GradientSet {
  FactorList grads;  // dL/dA_l, dL/dB_l; the frozen base receives none
};

struct BackwardResult {
  double loss = 0;
  GradientSet gradients;
};

inline BackwardResult Backward(const Model& model, const AdapterSet& adapters, const Matrix& x,
                               const Matrix& targets, LossKind kind) {
  ForwardCache cache;
  const Matrix out = Forward(model, &adapters, x, &cache);
  Matrix grad;
  BackwardResult result;
  result.loss = Loss(out, targets, kind, &grad);
  result.gradients.grads.resize(model.layers.size());
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const auto& layer = model.layers[l];
    const auto& ad = adapters.adapters[l];
    const Matrix dz = internal::ActivationBackward(layer.activation, cache.pre[l], cache.post[l], grad);
    const double s = ad.scaling();
    const Matrix dz_bt = dz * ad.b.transpose();  // n x r
    auto& g = result.gradients.grads[l];
    g.a = s * (cache.inputs[l].transpose() * dz_bt);
    g.b = s * (cache.xa[l].transpose() * dz);
    if (l > 0) grad = dz * layer.weight + s * (dz_bt * ad.a.transpose());
  }
  return result;
}

/// A += scale * dA, B += scale * dB for every adapter.
inline void ApplyUpdate(AdapterSet& adapters, const FactorList& deltas, double scale) {
  Require(deltas.size() == adapters.adapters.size(), ErrorCode::kShape, "update adapter count mismatch");
  for (std::size_t l = 0; l < deltas.size(); ++l) {
    auto& ad = adapters.adapters[l];
    Require(deltas[l].a.rows() == ad.a.rows() && deltas[l].a.cols() == ad.a.cols() &&
                deltas[l].b.rows() == ad.b.rows() && deltas[l].b.cols() == ad.b.cols(),
            ErrorCode::kShape, "update shape mismatch for adapter " + std::to_string(l));
    if (scale == 0.0) continue;
    ad.a += scale * deltas[l].a;
    ad.b += scale * deltas[l].b;
  }
}

/// Folds the adapters into the base weights: W' = W + (alpha/r) (A B)^T.
/// Merging is one-shot; a second merge of the same adapters is a state error.
inline Model MergeAdapters(const Model& model, AdapterSet& adapters) {
  Require(!adapters.merged, ErrorCode::kState, "adapters already merged");
  RequireCompatible(model, adapters);
  Model merged = model;
  for (std::size_t l = 0; l < merged.layers.size(); ++l) {
    const auto& ad = adapters.adapters[l];
    merged.layers[l].weight += ad.scaling() * (ad.a * ad.b).transpose();
  }
  adapters.merged = true;
  return merged;
}

inline std::size_t TrainableParameterCount(const AdapterSet& adapters) {
  std::size_t n = 0;
  for (const auto& ad : adapters.adapters) n += static_cast<std::size_t>(ad.rank) * (ad.a.rows() + ad.b.cols());
  return n;
}

inline std::size_t BaseParameterCount(const Model& model) {
  std::size_t n = 0;
  for (const auto& layer : model.layers) n += static_cast<std::size_t>(layer.weight.size());
  return n;
}

}  // namespace fedshield::lora

#endif  // FEDSHIELD_LORA_MODEL_HPP_
