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

// 64-bit modular arithmetic and NTT-friendly prime generation.

#ifndef FEDSHIELD_CKKS_MODARITH_HPP_
#define FEDSHIELD_CKKS_MODARITH_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedshield/common/error.hpp"

namespace fedshield::ckks {

using u64 = std::uint64_t;
using u128 = unsigned __int128;
using i128 = __int128;

// Moduli are kept below 2^61 so lazy sums of two residues never overflow.
inline constexpr int kMaxPrimeBits = 61;
inline constexpr int kMinPrimeBits = 17;

inline u64 AddMod(u64 a, u64 b, u64 q) {
  u64 s = a + b;
  return s >= q ? s - q : s;
}

inline u64 SubMod(u64 a, u64 b, u64 q) { return a >= b ? a - b : a + q - b; }

inline u64 MulMod(u64 a, u64 b, u64 q) {
  return static_cast<u64>(static_cast<u128>(a) * b % q);
}

inline u64 PowMod(u64 base, u64 exp, u64 q) {
  u64 result = 1 % q;
  base %= q;
  while (exp > 0) {
    if (exp & 1) result = MulMod(result, base, q);
    base = MulMod(base, base, q);
    exp >>= 1;
  }
  return result;
}

// q must be prime.
inline u64 InvMod(u64 a, u64 q) { return PowMod(a, q - 2, q); }

// Reduces a signed value into [0, q).
inline u64 ReduceSigned(std::int64_t v, u64 q) {
  if (v >= 0) return static_cast<u64>(v) % q;
  u64 r = static_cast<u64>(-(v + 1)) % q;  // avoids overflow at INT64_MIN
  return q - 1 - r;
}

inline u64 ReduceSigned128(i128 v, u64 q) {
  if (v >= 0) return static_cast<u64>(static_cast<u128>(v) % q);
  u128 r = static_cast<u128>(-(v + 1)) % q;
  return q - 1 - static_cast<u64>(r);
}

// Precomputed floor(w * 2^64 / q) for Shoup multiplication by a constant w.
inline u64 ShoupPrecompute(u64 w, u64 q) {
  return static_cast<u64>((static_cast<u128>(w) << 64) / q);
}

inline u64 MulModShoup(u64 x, u64 w, u64 w_shoup, u64 q) {
  u64 hi = static_cast<u64>((static_cast<u128>(x) * w_shoup) >> 64);
  u64 r = x * w - hi * q;
  return r >= q ? r - q : r;
}

// Deterministic Miller-Rabin, exact for all 64-bit inputs.
inline bool IsPrime(u64 n) {
  if (n < 2) return false;
  for (u64 p : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull,
                29ull, 31ull, 37ull}) {
    if (n % p == 0) return n == p;
  }
  u64 d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  for (u64 a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull,
                29ull, 31ull, 37ull}) {
    u64 x = PowMod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = MulMod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

// Picks one distinct prime q = 1 (mod 2*poly_degree) for every requested bit
// size, each the largest such prime below 2^bits not already taken.
inline std::vector<u64> GenerateNttPrimes(std::span<const int> bit_sizes,
                                          u64 poly_degree) {
  const u64 step = 2 * poly_degree;
  std::vector<u64> primes;
  primes.reserve(bit_sizes.size());
  for (int bits : bit_sizes) {
    if (bits < kMinPrimeBits || bits > kMaxPrimeBits) {
      Fail(ErrorCode::kParameter,
           "modulus bit size " + std::to_string(bits) + " outside [" +
               std::to_string(kMinPrimeBits) + ", " +
               std::to_string(kMaxPrimeBits) + "]");
    }
    const u64 upper = (u64{1} << bits) - 1;
    const u64 lower = u64{1} << (bits - 1);
    if (upper < step + 1) {
      Fail(ErrorCode::kParameter, "no NTT-friendly prime of " +
                                      std::to_string(bits) + " bits for degree " +
                                      std::to_string(poly_degree));
    }
    u64 candidate = (upper - 1) / step * step + 1;
    bool found = false;
    while (candidate >= lower) {
      bool taken = false;
      for (u64 p : primes) taken |= (p == candidate);
      if (!taken && IsPrime(candidate)) {
        found = true;
        break;
      }
      if (candidate < step) break;
      candidate -= step;
    }
    if (!found) {
      Fail(ErrorCode::kParameter, "no NTT-friendly prime of " +
                                      std::to_string(bits) + " bits for degree " +
                                      std::to_string(poly_degree));
    }
    primes.push_back(candidate);
  }
  return primes;
}

// Smallest-generator primitive 2n-th root of unity modulo q (q = 1 mod 2n).
inline u64 FindPrimitiveRoot(u64 two_n, u64 q) {
  const u64 exponent = (q - 1) / two_n;
  for (u64 x = 2; x < q; ++x) {
    u64 root = PowMod(x, exponent, q);
    if (PowMod(root, two_n / 2, q) == q - 1) return root;
  }
  Fail(ErrorCode::kParameter, "no primitive root for modulus");
}

}  // namespace fedshield::ckks

#endif  // FEDSHIELD_CKKS_MODARITH_HPP_
