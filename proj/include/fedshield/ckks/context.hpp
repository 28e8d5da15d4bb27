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

#ifndef FEDSHIELD_CKKS_CONTEXT_HPP_
#define FEDSHIELD_CKKS_CONTEXT_HPP_

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fedshield/ckks/modarith.hpp"
#include "fedshield/ckks/ntt.hpp"
#include "fedshield/common/error.hpp"

namespace fedshield::ckks {

struct CkksParams {
  std::size_t poly_degree = 4096;
  // Bit sizes of the RNS moduli, lowest level first.
  std::vector<int> modulus_bits = {60, 40, 60};
  double scale = 0x1p40;
  double noise_stddev = 3.2;

  static CkksParams TestDefault() { return {}; }

  // Deployment configuration: N = 16384, chain [60, 40, 40, 40, 60].
  static CkksParams Deployment() {
    return {16384, {60, 40, 40, 40, 60}, 0x1p40, 3.2};
  }

  friend bool operator==(const CkksParams&, const CkksParams&) = default;
};

// Throws a parameter error if `params` violates any structural invariant.
inline void ValidateParams(const CkksParams& params) {
  Require(params.poly_degree >= 8 && std::has_single_bit(params.poly_degree),
          ErrorCode::kParameter,
          "poly_degree must be a power of two >= 8, got " +
              std::to_string(params.poly_degree));
  Require(!params.modulus_bits.empty(), ErrorCode::kParameter,
          "modulus chain is empty");
  Require(params.modulus_bits.size() <= 255, ErrorCode::kParameter,
          "modulus chain too long");
  Require(params.scale > 0 && std::isfinite(params.scale),
          ErrorCode::kParameter, "scale must be positive");
  Require(params.noise_stddev > 0 && std::isfinite(params.noise_stddev),
          ErrorCode::kParameter, "noise_stddev must be positive");
  const auto& bits = params.modulus_bits;
  int smallest_middle = *std::min_element(bits.begin(), bits.end());
  if (bits.size() > 2) {
    smallest_middle = *std::min_element(bits.begin() + 1, bits.end() - 1);
  }
  Require(params.scale <= std::ldexp(1.0, smallest_middle + 10),
          ErrorCode::kParameter,
          "scale exceeds 2^(smallest middle modulus bits + 10)");
}

/// RNS polynomial in Z_Q[x]/(x^N + 1), Q = q_0 * ... * q_level.
/// Residues are stored modulus-major: component i occupies
/// [i*N, (i+1)*N). Values are always in coefficient form.
struct RingPoly {
  std::size_t degree = 0;
  int level = 0;
  std::vector<u64> residues;

  RingPoly() = default;
  RingPoly(std::size_t n, int lvl)
      : degree(n), level(lvl), residues(n * static_cast<std::size_t>(lvl + 1)) {}

  std::size_t moduli_count() const { return static_cast<std::size_t>(level) + 1; }

  std::span<u64> component(std::size_t i) {
    return std::span<u64>(residues).subspan(i * degree, degree);
  }
  std::span<const u64> component(std::size_t i) const {
    return std::span<const u64>(residues).subspan(i * degree, degree);
  }

  friend bool operator==(const RingPoly&, const RingPoly&) = default;
};

/// Immutable precomputation for one parameter set: the prime chain, NTT
/// tables per prime and the canonical-embedding tables used by the encoder.
class CkksContext {
 public:
  explicit CkksContext(CkksParams params) : params_(std::move(params)) {
    ValidateParams(params_);
    const std::size_t n = params_.poly_degree;
    primes_ = GenerateNttPrimes(params_.modulus_bits, n);
    ntt_.reserve(primes_.size());
    for (u64 q : primes_) ntt_.emplace_back(n, q);

    const std::size_t m = 2 * n;
    rot_group_.resize(n / 2);
    std::size_t five_pow = 1;
    for (auto& r : rot_group_) {
      r = five_pow;
      five_pow = five_pow * 5 % m;
    }
    root_powers_.resize(m + 1);
    for (std::size_t j = 0; j <= m; ++j) {
      long double angle = 2.0L * std::numbers::pi_v<long double> *
                          static_cast<long double>(j) / static_cast<long double>(m);
      root_powers_[j] = {static_cast<double>(std::cos(angle)),
                         static_cast<double>(std::sin(angle))};
    }
  }

  static std::shared_ptr<const CkksContext> Create(CkksParams params) {
    return std::make_shared<const CkksContext>(std::move(params));
  }

  const CkksParams& params() const { return params_; }
  std::size_t degree() const { return params_.poly_degree; }
  std::size_t slot_count() const { return params_.poly_degree / 2; }
  int top_level() const { return static_cast<int>(primes_.size()) - 1; }
  std::span<const u64> primes() const { return primes_; }
  u64 prime(std::size_t i) const { return primes_[i]; }
  const NttTables& ntt(std::size_t i) const { return ntt_[i]; }

  // Powers 5^j mod 2N indexing the slot ordering of the embedding.
  std::span<const std::size_t> rot_group() const { return rot_group_; }
  // exp(2*pi*i*j / 2N) for j in [0, 2N].
  std::span<const std::complex<double>> root_powers() const { return root_powers_; }

 private:
  CkksParams params_;
  std::vector<u64> primes_;
  std::vector<NttTables> ntt_;
  std::vector<std::size_t> rot_group_;
  std::vector<std::complex<double>> root_powers_;
};

using ContextPtr = std::shared_ptr<const CkksContext>;

// ---------------------------------------------------------------------------
// RingPoly arithmetic helpers over the first level+1 moduli of a context.

inline RingPoly FromSigned(const CkksContext& ctx, std::span<const std::int64_t> coeffs,
                           int level) {
  RingPoly p(ctx.degree(), level);
  for (std::size_t i = 0; i < p.moduli_count(); ++i) {
    const u64 q = ctx.prime(i);
    auto comp = p.component(i);
    for (std::size_t k = 0; k < comp.size(); ++k) comp[k] = ReduceSigned(coeffs[k], q);
  }
  return p;
}

inline void AddInPlace(const CkksContext& ctx, RingPoly& a, const RingPoly& b) {
  for (std::size_t i = 0; i < a.moduli_count(); ++i) {
    const u64 q = ctx.prime(i);
    auto ca = a.component(i);
    auto cb = b.component(i);
    for (std::size_t k = 0; k < ca.size(); ++k) ca[k] = AddMod(ca[k], cb[k], q);
  }
}

// Negacyclic product a*b restricted to `level`.
inline RingPoly Multiply(const CkksContext& ctx, const RingPoly& a, const RingPoly& b,
                         int level) {
  RingPoly out(ctx.degree(), level);
  std::vector<u64> tmp(ctx.degree());
  for (std::size_t i = 0; i < out.moduli_count(); ++i) {
    const u64 q = ctx.prime(i);
    auto dst = out.component(i);
    std::copy_n(a.component(i).begin(), ctx.degree(), dst.begin());
    std::copy_n(b.component(i).begin(), ctx.degree(), tmp.begin());
    ctx.ntt(i).Forward(dst);
    ctx.ntt(i).Forward(tmp);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = MulMod(dst[k], tmp[k], q);
    ctx.ntt(i).Inverse(dst);
  }
  return out;
}

// Drops moduli above `level` (exact restriction of the RNS representation).
inline RingPoly Truncate(const RingPoly& p, int level) {
  RingPoly out(p.degree, level);
  std::copy_n(p.residues.begin(), out.residues.size(), out.residues.begin());
  return out;
}

}  // namespace fedshield::ckks

#endif  // FEDSHIELD_CKKS_CONTEXT_HPP_
