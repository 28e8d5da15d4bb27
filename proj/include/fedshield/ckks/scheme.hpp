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

// Public-key leveled CKKS restricted to what secure averaging needs:
// encryption, decryption, ciphertext addition and multiplication by a
// plaintext scalar followed by a rescale. Ciphertexts always have exactly two
// components; there is no relinearization or key switching.

#ifndef FEDSHIELD_CKKS_SCHEME_HPP_
#define FEDSHIELD_CKKS_SCHEME_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedshield/ckks/context.hpp"
#include "fedshield/ckks/encoder.hpp"

namespace fedshield::ckks {

struct SecretKey {
  RingPoly s;  // ternary coefficients, stored at the top level
};

struct PublicKey {
  RingPoly b;  // -a*s + e
  RingPoly a;
};

struct Ciphertext {
  RingPoly c0;
  RingPoly c1;
  double scale = 1.0;

  int level() const { return c0.level; }
};

namespace internal {

inline std::vector<std::int64_t> SampleTernary(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dist(-1, 1);
  std::vector<std::int64_t> out(n);
  for (auto& v : out) v = dist(rng);
  return out;
}

// Rounded Gaussian, tail-cut at six standard deviations.
inline std::vector<std::int64_t> SampleGaussian(std::size_t n, double stddev,
                                                std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  const double bound = 6.0 * stddev;
  std::vector<std::int64_t> out(n);
  for (auto& v : out) {
    double x;
    do {
      x = dist(rng);
    } while (std::abs(x) > bound);
    v = static_cast<std::int64_t>(std::llround(x));
  }
  return out;
}

inline RingPoly SampleUniform(const CkksContext& ctx, int level, std::mt19937_64& rng) {
  RingPoly p(ctx.degree(), level);
  for (std::size_t i = 0; i < p.moduli_count(); ++i) {
    std::uniform_int_distribution<u64> dist(0, ctx.prime(i) - 1);
    for (auto& c : p.component(i)) c = dist(rng);
  }
  return p;
}

// Per-modulus NTT image of `p` restricted to `level`.
inline std::vector<u64> ToNtt(const CkksContext& ctx, const RingPoly& p, int level) {
  const std::size_t n = ctx.degree();
  std::vector<u64> out(n * static_cast<std::size_t>(level + 1));
  for (std::size_t i = 0; i <= static_cast<std::size_t>(level); ++i) {
    std::span<u64> dst(out.data() + i * n, n);
    std::copy_n(p.component(i).begin(), n, dst.begin());
    ctx.ntt(i).Forward(dst);
  }
  return out;
}

}  // namespace internal

/// Generates a key pair. Deterministic for a fixed seed.
inline std::pair<SecretKey, PublicKey> KeyGen(const CkksContext& ctx, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int top = ctx.top_level();
  const auto s_coeffs = internal::SampleTernary(ctx.degree(), rng);
  SecretKey sk{FromSigned(ctx, s_coeffs, top)};
  RingPoly a = internal::SampleUniform(ctx, top, rng);
  const auto e = FromSigned(ctx, internal::SampleGaussian(ctx.degree(), ctx.params().noise_stddev, rng), top);
  // b = -(a*s) + e
  RingPoly b = Multiply(ctx, a, sk.s, top);
  for (std::size_t i = 0; i < b.moduli_count(); ++i) {
    const u64 q = ctx.prime(i);
    auto cb = b.component(i);
    auto ce = e.component(i);
    for (std::size_t k = 0; k < cb.size(); ++k) cb[k] = SubMod(ce[k], cb[k], q);
  }
  return {std::move(sk), PublicKey{std::move(b), std::move(a)}};
}

/// Encrypts with a cached NTT image of the public key; use when encrypting
/// many plaintexts under one key.
class Encryptor {
 public:
  Encryptor(const CkksContext& ctx, const PublicKey& pk)
      : ctx_(&ctx),
        b_ntt_(internal::ToNtt(ctx, pk.b, ctx.top_level())),
        a_ntt_(internal::ToNtt(ctx, pk.a, ctx.top_level())) {}

  // c0 = b*u + e1 + m, c1 = a*u + e2.
  Ciphertext Encrypt(const Plaintext& pt, std::uint64_t seed) const {
    const CkksContext& ctx = *ctx_;
    const int level = pt.level();
    Require(level >= 0 && level <= ctx.top_level(), ErrorCode::kState,
            "plaintext level incompatible with public key");
    Require(pt.poly.degree == ctx.degree(), ErrorCode::kState, "plaintext degree mismatch");
    std::mt19937_64 rng(seed);
    const std::size_t n = ctx.degree();
    const double sigma = ctx.params().noise_stddev;
    const auto u = internal::SampleTernary(n, rng);
    const auto e1 = internal::SampleGaussian(n, sigma, rng);
    const auto e2 = internal::SampleGaussian(n, sigma, rng);

    Ciphertext ct{RingPoly(n, level), RingPoly(n, level), pt.scale};
    std::vector<u64> u_ntt(n);
    for (std::size_t i = 0; i <= static_cast<std::size_t>(level); ++i) {
      const u64 q = ctx.prime(i);
      for (std::size_t k = 0; k < n; ++k) u_ntt[k] = ReduceSigned(u[k], q);
      ctx.ntt(i).Forward(u_ntt);
      auto c0 = ct.c0.component(i);
      auto c1 = ct.c1.component(i);
      const u64* b = b_ntt_.data() + i * n;
      const u64* a = a_ntt_.data() + i * n;
      for (std::size_t k = 0; k < n; ++k) {
        c0[k] = MulMod(b[k], u_ntt[k], q);
        c1[k] = MulMod(a[k], u_ntt[k], q);
      }
      ctx.ntt(i).Inverse(c0);
      ctx.ntt(i).Inverse(c1);
      auto m = pt.poly.component(i);
      for (std::size_t k = 0; k < n; ++k) {
        c0[k] = AddMod(AddMod(c0[k], ReduceSigned(e1[k], q), q), m[k], q);
        c1[k] = AddMod(c1[k], ReduceSigned(e2[k], q), q);
      }
    }
    return ct;
  }

 private:
  const CkksContext* ctx_;
  std::vector<u64> b_ntt_;
  std::vector<u64> a_ntt_;
};

inline Ciphertext Encrypt(const CkksContext& ctx, const Plaintext& pt, const PublicKey& pk,
                          std::uint64_t seed) {
  return Encryptor(ctx, pk).Encrypt(pt, seed);
}

/// m = c0 + c1*s. A wrong key yields noise; this is not detectable.
inline Plaintext Decrypt(const CkksContext& ctx, const Ciphertext& ct, const SecretKey& sk) {
  const int level = ct.level();
  Require(ct.c1.level == level && level <= sk.s.level, ErrorCode::kState,
          "ciphertext level incompatible with secret key");
  RingPoly m = Multiply(ctx, ct.c1, sk.s, level);
  AddInPlace(ctx, m, ct.c0);
  return Plaintext{std::move(m), ct.scale, ctx.slot_count()};
}

// Scales are compatible when equal within one part in 2^10.
inline bool ScalesMatch(double a, double b) {
  return std::abs(a - b) <= std::ldexp(std::max(std::abs(a), std::abs(b)), -10);
}

inline Ciphertext Add(const CkksContext& ctx, const Ciphertext& a, const Ciphertext& b) {
  Require(a.level() == b.level(), ErrorCode::kState,
          "level mismatch: " + std::to_string(a.level()) + " vs " + std::to_string(b.level()));
  Require(ScalesMatch(a.scale, b.scale), ErrorCode::kState, "scale mismatch");
  Ciphertext out = a;
  AddInPlace(ctx, out.c0, b.c0);
  AddInPlace(ctx, out.c1, b.c1);
  return out;
}

namespace internal {

// Divides by the last active prime with rounding and drops it.
inline RingPoly RescaleDropLast(const CkksContext& ctx, const RingPoly& p) {
  const int level = p.level;
  const u64 q_last = ctx.prime(static_cast<std::size_t>(level));
  const auto last = p.component(static_cast<std::size_t>(level));
  RingPoly out(p.degree, level - 1);
  for (std::size_t i = 0; i < out.moduli_count(); ++i) {
    const u64 q = ctx.prime(i);
    const u64 inv = InvMod(q_last % q, q);
    auto src = p.component(i);
    auto dst = out.component(i);
    for (std::size_t k = 0; k < dst.size(); ++k) {
      // centered remainder r of c mod q_last; (c - r) / q_last is exact.
      const u64 r = last[k];
      const u64 r_mod_q = r > q_last / 2 ? SubMod(r % q, q_last % q, q) : r % q;
      dst[k] = MulMod(SubMod(src[k], r_mod_q, q), inv, q);
    }
  }
  return out;
}

}  // namespace internal

/// Multiplies by the real constant `k` and rescales. The constant is encoded
/// at a scale equal to the dropped prime, so the output keeps the input's
/// scale and sits one level lower.
inline Ciphertext MulPlainScalar(const CkksContext& ctx, const Ciphertext& ct, double k) {
  const int level = ct.level();
  if (level < 1) Fail(ErrorCode::kDepthExhausted, "no levels remaining for rescale");
  Require(std::isfinite(k), ErrorCode::kParameter, "scalar must be finite");
  const u64 q_last = ctx.prime(static_cast<std::size_t>(level));
  const long double scaled = static_cast<long double>(k) * static_cast<long double>(q_last);
  Require(std::abs(scaled) < 0x1p120L, ErrorCode::kRange, "scalar too large");
  const long double high = std::floor(scaled / 0x1p60L);
  const long double low = scaled - high * 0x1p60L;  // exact, in [0, 2^60)
  const i128 factor = static_cast<i128>(static_cast<std::int64_t>(high)) * (i128{1} << 60) +
                      static_cast<i128>(std::llroundl(low));
  Ciphertext scaled_ct{RingPoly(ct.c0.degree, level), RingPoly(ct.c1.degree, level), ct.scale};
  for (std::size_t i = 0; i <= static_cast<std::size_t>(level); ++i) {
    const u64 q = ctx.prime(i);
    const u64 f = ReduceSigned128(factor, q);
    const u64 fs = ShoupPrecompute(f, q);
    auto s0 = ct.c0.component(i);
    auto s1 = ct.c1.component(i);
    auto d0 = scaled_ct.c0.component(i);
    auto d1 = scaled_ct.c1.component(i);
    for (std::size_t j = 0; j < d0.size(); ++j) {
      d0[j] = MulModShoup(s0[j], f, fs, q);
      d1[j] = MulModShoup(s1[j], f, fs, q);
    }
  }
  return Ciphertext{internal::RescaleDropLast(ctx, scaled_ct.c0),
                    internal::RescaleDropLast(ctx, scaled_ct.c1), ct.scale};
}

}  // namespace fedshield::ckks

#endif  // FEDSHIELD_CKKS_SCHEME_HPP_
