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

#ifndef FEDSHIELD_LORA_TENSORS_HPP_
#define FEDSHIELD_LORA_TENSORS_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedshield/common/error.hpp"

namespace fedshield::lora {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// One adapter's pair of factor-shaped tensors (parameters, deltas or
// gradients): a is d_in x r, b is r x d_out.
struct FactorPair {
  Matrix a;
  Matrix b;
};

using FactorList = std::vector<FactorPair>;

struct TensorShape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

// Tensors are ordered A_0, B_0, A_1, B_1, ...
inline std::vector<TensorShape> Shapes(const FactorList& list) {
  std::vector<TensorShape> out;
  out.reserve(2 * list.size());
  for (const auto& f : list) {
    out.push_back({static_cast<std::size_t>(f.a.rows()), static_cast<std::size_t>(f.a.cols())});
    out.push_back({static_cast<std::size_t>(f.b.rows()), static_cast<std::size_t>(f.b.cols())});
  }
  return out;
}

inline std::vector<Matrix*> Tensors(FactorList& list) {
  std::vector<Matrix*> out;
  for (auto& f : list) {
    out.push_back(&f.a);
    out.push_back(&f.b);
  }
  return out;
}

inline std::vector<const Matrix*> Tensors(const FactorList& list) {
  std::vector<const Matrix*> out;
  for (const auto& f : list) {
    out.push_back(&f.a);
    out.push_back(&f.b);
  }
  return out;
}

inline std::string TensorName(std::size_t flat_index) {
  return std::string(flat_index % 2 == 0 ? "A" : "B") + std::to_string(flat_index / 2);
}

inline void RequireSameShapes(const FactorList& x, const FactorList& y, const char* what) {
  if (Shapes(x) != Shapes(y)) Fail(ErrorCode::kShape, std::string(what) + ": tensor shape mismatch");
}

inline FactorList ZerosLike(const FactorList& list) {
  FactorList out;
  out.reserve(list.size());
  for (const auto& f : list) {
    out.push_back({Matrix::Zero(f.a.rows(), f.a.cols()), Matrix::Zero(f.b.rows(), f.b.cols())});
  }
  return out;
}

inline std::size_t TotalSize(const FactorList& list) {
  std::size_t n = 0;
  for (const auto& s : Shapes(list)) n += s.size();
  return n;
}

// Row-major flattening, tensors concatenated in Shapes() order.
inline std::vector<double> Flatten(const FactorList& list) {
  std::vector<double> out;
  out.reserve(TotalSize(list));
  for (const Matrix* m : Tensors(list)) out.insert(out.end(), m->data(), m->data() + m->size());
  return out;
}

inline FactorList Unflatten(std::span<const double> values, std::span<const TensorShape> shapes) {
  Require(shapes.size() % 2 == 0, ErrorCode::kShape, "tensor count must be even");
  std::size_t need = 0;
  for (const auto& s : shapes) need += s.size();
  Require(values.size() == need, ErrorCode::kShape, "flattened length does not match shapes");
  FactorList out(shapes.size() / 2);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    Matrix m(shapes[i].rows, shapes[i].cols);
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), shapes[i].size(), m.data());
    pos += shapes[i].size();
    (i % 2 == 0 ? out[i / 2].a : out[i / 2].b) = std::move(m);
  }
  return out;
}

inline double SquaredNorm(const FactorList& list) {
  double s = 0;
  for (const Matrix* m : Tensors(list)) s += m->squaredNorm();
  return s;
}

inline double L2Norm(const FactorList& list) { return std::sqrt(SquaredNorm(list)); }

}  // namespace fedshield::lora

#endif  // FEDSHIELD_LORA_TENSORS_HPP_
