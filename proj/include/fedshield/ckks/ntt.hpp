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

#ifndef FEDSHIELD_CKKS_NTT_HPP_
#define FEDSHIELD_CKKS_NTT_HPP_

#include <bit>
#include <cstddef>
#include <span>
#include <vector>

#include "fedshield/ckks/modarith.hpp"

namespace fedshield::ckks {

/// Negacyclic number-theoretic transform over Z_q[x]/(x^n + 1).
///
/// Forward() maps coefficients to evaluations at the odd powers of a
/// primitive 2n-th root psi (bit-reversed order); pointwise products in that
/// domain are negacyclic convolutions. Inverse() undoes Forward() exactly.
class NttTables {
 public:
  NttTables(std::size_t n, u64 q) : n_(n), q_(q) {
    Require(n >= 2 && std::has_single_bit(n), ErrorCode::kParameter,
            "NTT size must be a power of two");
    Require(q % (2 * n) == 1, ErrorCode::kParameter,
            "modulus is not 1 mod 2n");
    const u64 psi = FindPrimitiveRoot(2 * n, q);
    const u64 psi_inv = InvMod(psi, q);
    const int log_n = std::countr_zero(n);
    roots_.resize(n);
    inv_roots_.resize(n);
    u64 power = 1;
    u64 inv_power = 1;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = BitReverse(i, log_n);
      roots_[r] = power;
      inv_roots_[r] = inv_power;
      power = MulMod(power, psi, q);
      inv_power = MulMod(inv_power, psi_inv, q);
    }
    roots_shoup_.resize(n);
    inv_roots_shoup_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      roots_shoup_[i] = ShoupPrecompute(roots_[i], q);
      inv_roots_shoup_[i] = ShoupPrecompute(inv_roots_[i], q);
    }
    n_inv_ = InvMod(static_cast<u64>(n) % q, q);
    n_inv_shoup_ = ShoupPrecompute(n_inv_, q);
  }

  std::size_t size() const { return n_; }
  u64 modulus() const { return q_; }

  void Forward(std::span<u64> a) const {
    std::size_t t = n_;
    for (std::size_t m = 1; m < n_; m <<= 1) {
      t >>= 1;
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j1 = 2 * i * t;
        const u64 w = roots_[m + i];
        const u64 ws = roots_shoup_[m + i];
        for (std::size_t j = j1; j < j1 + t; ++j) {
          const u64 u = a[j];
          const u64 v = MulModShoup(a[j + t], w, ws, q_);
          a[j] = AddMod(u, v, q_);
          a[j + t] = SubMod(u, v, q_);
        }
      }
    }
  }

  void Inverse(std::span<u64> a) const {
    std::size_t t = 1;
    for (std::size_t m = n_; m > 1; m >>= 1) {
      const std::size_t h = m >> 1;
      std::size_t j1 = 0;
      for (std::size_t i = 0; i < h; ++i) {
        const u64 w = inv_roots_[h + i];
        const u64 ws = inv_roots_shoup_[h + i];
        for (std::size_t j = j1; j < j1 + t; ++j) {
          const u64 u = a[j];
          const u64 v = a[j + t];
          a[j] = AddMod(u, v, q_);
          a[j + t] = MulModShoup(SubMod(u, v, q_), w, ws, q_);
        }
        j1 += 2 * t;
      }
      t <<= 1;
    }
    for (auto& x : a) x = MulModShoup(x, n_inv_, n_inv_shoup_, q_);
  }

 private:
  static std::size_t BitReverse(std::size_t x, int bits) {
    std::size_t r = 0;
    for (int i = 0; i < bits; ++i) {
      r = (r << 1) | (x & 1);
      x >>= 1;
    }
    return r;
  }

  std::size_t n_;
  u64 q_;
  std::vector<u64> roots_, roots_shoup_;
  std::vector<u64> inv_roots_, inv_roots_shoup_;
  u64 n_inv_ = 0, n_inv_shoup_ = 0;
};

}  // namespace fedshield::ckks

#endif  // FEDSHIELD_CKKS_NTT_HPP_
