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

// Slot encoding: real vectors <-> scaled integer polynomials through the
// canonical embedding. Slot j corresponds to evaluation at w^(5^j mod 2N),
// w = exp(i*pi/N); conjugate slots are implied, so imaginary parts of the
// decoded slots vanish up to noise.

#ifndef FEDSHIELD_CKKS_ENCODER_HPP_
#define FEDSHIELD_CKKS_ENCODER_HPP_

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedshield/ckks/context.hpp"

namespace fedshield::ckks {

struct Plaintext {
  RingPoly poly;
  double scale = 1.0;
  std::size_t slot_count = 0;

  int level() const { return poly.level; }
};

namespace internal {

inline void BitReverse(std::span<std::complex<double>> vals) {
  const std::size_t n = vals.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(vals[i], vals[j]);
  }
}

// Evaluates the packed half-size polynomial at the slot roots.
inline void EmbedForward(const CkksContext& ctx, std::span<std::complex<double>> vals) {
  const std::size_t n = vals.size();
  const std::size_t m = 2 * ctx.degree();
  const auto rot = ctx.rot_group();
  const auto roots = ctx.root_powers();
  BitReverse(vals);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len >> 1;
    const std::size_t quarter_m = len << 2;
    const std::size_t gap = m / quarter_m;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const std::size_t idx = (rot[j] % quarter_m) * gap;
        const std::complex<double> u = vals[i + j];
        const std::complex<double> v = vals[i + j + half] * roots[idx];
        vals[i + j] = u + v;
        vals[i + j + half] = u - v;
      }
    }
  }
}

inline void EmbedInverse(const CkksContext& ctx, std::span<std::complex<double>> vals) {
  const std::size_t n = vals.size();
  const std::size_t m = 2 * ctx.degree();
  const auto rot = ctx.rot_group();
  const auto roots = ctx.root_powers();
  for (std::size_t len = n; len >= 2; len >>= 1) {
    const std::size_t half = len >> 1;
    const std::size_t quarter_m = len << 2;
    const std::size_t gap = m / quarter_m;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const std::size_t idx = (quarter_m - rot[j] % quarter_m) * gap;
        const std::complex<double> u = vals[i + j] + vals[i + j + half];
        const std::complex<double> v = (vals[i + j] - vals[i + j + half]) * roots[idx];
        vals[i + j] = u;
        vals[i + j + half] = v;
      }
    }
  }
  BitReverse(vals);
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& v : vals) v *= inv;
}

}  // namespace internal

/// Reconstructs each coefficient of `poly` as a centered integer in
/// (-Q/2, Q/2] using balanced mixed-radix (Garner) digits.
inline std::vector<long double> CenteredCoefficients(const CkksContext& ctx,
                                                     const RingPoly& poly) {
  const std::size_t count = poly.moduli_count();
  const std::size_t n = poly.degree;
  // inv[i][j] = q_j^{-1} mod q_i for j < i.
  std::vector<std::vector<u64>> inv(count);
  std::vector<long double> radix(count, 1.0L);
  for (std::size_t i = 0; i < count; ++i) {
    inv[i].resize(i);
    for (std::size_t j = 0; j < i; ++j) inv[i][j] = InvMod(ctx.prime(j) % ctx.prime(i), ctx.prime(i));
    if (i > 0) radix[i] = radix[i - 1] * static_cast<long double>(ctx.prime(i - 1));
  }
  std::vector<long double> out(n);
  std::vector<std::int64_t> digits(count);
  for (std::size_t k = 0; k < n; ++k) {
    long double value = 0.0L;
    for (std::size_t i = 0; i < count; ++i) {
      const u64 q = ctx.prime(i);
      u64 x = poly.component(i)[k];
      for (std::size_t j = 0; j < i; ++j) {
        x = SubMod(x, ReduceSigned(digits[j], q), q);
        x = MulMod(x, inv[i][j], q);
      }
      const std::int64_t d = x > q / 2 ? static_cast<std::int64_t>(x) - static_cast<std::int64_t>(q)
                                       : static_cast<std::int64_t>(x);
      digits[i] = d;
      value += static_cast<long double>(d) * radix[i];
    }
    out[k] = value;
  }
  return out;
}

/// Encodes up to slot_count reals at `scale` into a plaintext at `level`
/// (default: top of the chain). Unused slots are zero.
inline Plaintext Encode(const CkksContext& ctx, std::span<const double> values,
                        double scale, int level = -1) {
  const std::size_t slots = ctx.slot_count();
  if (level < 0) level = ctx.top_level();
  Require(level <= ctx.top_level(), ErrorCode::kState, "plaintext level above chain");
  if (values.size() > slots) {
    Fail(ErrorCode::kCapacity, "cannot encode " + std::to_string(values.size()) +
                                   " values into " + std::to_string(slots) + " slots");
  }
  Require(scale > 0 && std::isfinite(scale), ErrorCode::kParameter, "scale must be positive");
  std::vector<std::complex<double>> work(slots);
  for (std::size_t i = 0; i < values.size(); ++i) {
    Require(std::isfinite(values[i]), ErrorCode::kRange, "non-finite value");
    work[i] = values[i];
  }
  internal::EmbedInverse(ctx, work);

  // Every coefficient must stay decryptable at the lowest level.
  const double headroom = std::min(0x1p62, static_cast<double>(ctx.prime(0)) / 2.0);
  std::vector<std::int64_t> coeffs(ctx.degree());
  for (std::size_t i = 0; i < slots; ++i) {
    const double re = std::round(work[i].real() * scale);
    const double im = std::round(work[i].imag() * scale);
    if (std::abs(re) >= headroom || std::abs(im) >= headroom) {
      Fail(ErrorCode::kRange, "encoded magnitude exceeds modulus headroom");
    }
    coeffs[i] = static_cast<std::int64_t>(re);
    coeffs[i + slots] = static_cast<std::int64_t>(im);
  }
  return Plaintext{FromSigned(ctx, coeffs, level), scale, slots};
}

/// Decodes all slot_count slots (real parts).
inline std::vector<double> Decode(const CkksContext& ctx, const Plaintext& pt) {
  Require(pt.poly.degree == ctx.degree(), ErrorCode::kFormat, "plaintext degree mismatch");
  Require(pt.scale > 0, ErrorCode::kFormat, "plaintext scale must be positive");
  const std::size_t slots = ctx.slot_count();
  const auto coeffs = CenteredCoefficients(ctx, pt.poly);
  const long double inv_scale = 1.0L / static_cast<long double>(pt.scale);
  std::vector<std::complex<double>> work(slots);
  for (std::size_t i = 0; i < slots; ++i) {
    work[i] = {static_cast<double>(coeffs[i] * inv_scale),
               static_cast<double>(coeffs[i + slots] * inv_scale)};
  }
  internal::EmbedForward(ctx, work);
  std::vector<double> out(slots);
  for (std::size_t i = 0; i < slots; ++i) out[i] = work[i].real();
  return out;
}

}  // namespace fedshield::ckks

#endif  // FEDSHIELD_CKKS_ENCODER_HPP_
