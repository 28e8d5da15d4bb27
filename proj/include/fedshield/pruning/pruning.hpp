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

// Dynamic unstructured pruning of adapter updates: a linear rate schedule and
// per-tensor L1-magnitude masks with an exact pruned-entry count.

#ifndef FEDSHIELD_PRUNING_PRUNING_HPP_
#define FEDSHIELD_PRUNING_PRUNING_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/SVD>

#include "fedshield/lora/tensors.hpp"
#include "fedshield/lora/train.hpp"

namespace fedshield::pruning {

using lora::FactorList;
using lora::LoraUpdate;
using lora::Matrix;

struct PruneSchedule {
  double p0 = 0.2;
  double p_target = 0.5;
  int t_eff = 0;
  int t_target = 200;
};

inline void ValidateSchedule(const PruneSchedule& s) {
  Require(s.p0 >= 0 && s.p0 <= s.p_target && s.p_target <= 1, ErrorCode::kParameter,
          "prune schedule needs 0 <= p0 <= p_target <= 1");
  Require(s.t_eff < s.t_target, ErrorCode::kParameter, "prune schedule needs t_eff < t_target");
}

/// Rate for round t: p0 up to t_eff, then a linear ramp that saturates at
/// p_target from t_target onwards.
inline double ScheduleRate(const PruneSchedule& s, int t) {
  ValidateSchedule(s);
  const double progress = std::clamp(static_cast<double>(t - s.t_eff) / static_cast<double>(s.t_target - s.t_eff), 0.0, 1.0);
  if (progress >= 1.0) return s.p_target;
  return progress * (s.p_target - s.p0) + s.p0;
}

// Per-tensor keep masks, tensors ordered as in lora::Shapes().
struct PruneMask {
  std::vector<std::vector<std::uint8_t>> keep;  // 1 = kept, 0 = pruned
  std::vector<lora::TensorShape> shapes;
  double rate = 0;

  double RealizedSparsity(std::size_t tensor) const {
    const auto& k = keep[tensor];
    if (k.empty()) return 0.0;
    return static_cast<double>(std::count(k.begin(), k.end(), std::uint8_t{0})) / static_cast<double>(k.size());
  }

  std::size_t PrunedCount(std::size_t tensor) const {
    return static_cast<std::size_t>(std::count(keep[tensor].begin(), keep[tensor].end(), std::uint8_t{0}));
  }
};

// floor(p * n), tolerant of representation error in p (e.g. 0.35 * 20).
inline std::size_t PrunedCountFor(double p, std::size_t n) {
  return static_cast<std::size_t>(std::floor(p * static_cast<double>(n) + 1e-9));
}

/// Keep-mask for one flat tensor: zeroes exactly floor(p * n) entries of
/// smallest magnitude, preferring the lowest flat index among equal ones.
inline std::vector<std::uint8_t> MagnitudeMask(std::span<const double> values, double p) {
  const std::size_t n = values.size();
  std::vector<std::uint8_t> keep(n, 1);
  const std::size_t k = PrunedCountFor(p, n);
  if (k == 0) return keep;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto smaller = [&](std::size_t i, std::size_t j) {
    const double ai = std::abs(values[i]);
    const double aj = std::abs(values[j]);
    return ai < aj || (ai == aj && i < j);
  };
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k - 1), idx.end(), smaller);
  for (std::size_t i = 0; i < k; ++i) keep[idx[i]] = 0;
  return keep;
}

inline PruneMask ComputeMask(const FactorList& tensors, double p) {
  Require(p >= 0 && p < 1, ErrorCode::kParameter, "prune rate must be in [0, 1)");
  PruneMask mask;
  mask.rate = p;
  mask.shapes = lora::Shapes(tensors);
  for (const Matrix* m : lora::Tensors(tensors)) {
    mask.keep.push_back(MagnitudeMask(std::span<const double>(m->data(), static_cast<std::size_t>(m->size())), p));
  }
  return mask;
}

inline PruneMask ComputeMask(const LoraUpdate& update, double p) { return ComputeMask(update.deltas, p); }

/// Elementwise product with the mask; kept entries are copied bit-for-bit.
inline FactorList ApplyMask(const FactorList& tensors, const PruneMask& mask) {
  Require(lora::Shapes(tensors) == mask.shapes, ErrorCode::kShape, "mask shape mismatch");
  FactorList out = tensors;
  auto targets = lora::Tensors(out);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    double* data = targets[t]->data();
    for (std::size_t i = 0; i < mask.keep[t].size(); ++i) {
      if (!mask.keep[t][i]) data[i] = 0.0;
    }
  }
  return out;
}

inline LoraUpdate ApplyMask(const LoraUpdate& update, const PruneMask& mask) {
  return LoraUpdate{ApplyMask(update.deltas, mask), update.round, update.client_id};
}

/// ||update - pruned||_2 over all tensors.
inline double PruningErrorNorm(const FactorList& update, const FactorList& pruned) {
  lora::RequireSameShapes(update, pruned, "pruning error");
  double sq = 0;
  const auto a = lora::Tensors(update);
  const auto b = lora::Tensors(pruned);
  for (std::size_t t = 0; t < a.size(); ++t) sq += (*a[t] - *b[t]).squaredNorm();
  return std::sqrt(sq);
}

inline double PruningErrorNorm(const LoraUpdate& update, const LoraUpdate& pruned) {
  return PruningErrorNorm(update.deltas, pruned.deltas);
}

enum class Granularity { kPerFactor, kProduct };

inline std::string_view GranularityName(Granularity g) { return g == Granularity::kPerFactor ? "per_factor" : "product"; }

inline Granularity ParseGranularity(std::string_view s) {
  if (s == "per_factor") return Granularity::kPerFactor;
  if (s == "product") return Granularity::kProduct;
  Fail(ErrorCode::kParameter, "unknown prune granularity '" + std::string(s) + "'");
}

/// Alternate mode: masks the product dA * dB (d_in x d_out) and re-fits rank-r
/// factors to the masked product by truncated SVD, splitting singular values
/// evenly between the two factors.
inline FactorList PruneProductRefit(const FactorList& deltas, double p) {
  Require(p >= 0 && p < 1, ErrorCode::kParameter, "prune rate must be in [0, 1)");
  FactorList out;
  for (const auto& f : deltas) {
    Matrix product = f.a * f.b;
    const auto keep = MagnitudeMask(std::span<const double>(product.data(), static_cast<std::size_t>(product.size())), p);
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (!keep[i]) product.data()[i] = 0.0;
    }
    const Eigen::Index r = f.a.cols();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(product, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd root = svd.singularValues().head(r).cwiseSqrt();
    Matrix a = svd.matrixU().leftCols(r) * root.asDiagonal();
    Matrix b = root.asDiagonal() * svd.matrixV().leftCols(r).transpose();
    out.push_back({std::move(a), std::move(b)});
  }
  return out;
}

}  // namespace fedshield::pruning

#endif  // FEDSHIELD_PRUNING_PRUNING_HPP_
