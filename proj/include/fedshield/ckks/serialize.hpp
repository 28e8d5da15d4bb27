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

// Ciphertext wire format (all integers little-endian):
//
//   "FSHE" | version u16 | poly_degree u32 | level u8 | modulus count u8 |
//   scale f64 | per modulus: prime u64, c0[poly_degree] u64, c1[poly_degree] u64

#ifndef FEDSHIELD_CKKS_SERIALIZE_HPP_
#define FEDSHIELD_CKKS_SERIALIZE_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "fedshield/ckks/scheme.hpp"
#include "fedshield/common/bytes.hpp"

namespace fedshield::ckks {

inline constexpr char kCiphertextMagic[] = "FSHE";
inline constexpr std::uint16_t kCiphertextVersion = 1;

inline std::size_t SerializedCiphertextSize(std::size_t degree, int level) {
  return 4 + 2 + 4 + 1 + 1 + 8 + static_cast<std::size_t>(level + 1) * (8 + 16 * degree);
}

inline void SerializeCiphertext(const CkksContext& ctx, const Ciphertext& ct, Bytes& out) {
  const int level = ct.level();
  out.reserve(out.size() + SerializedCiphertextSize(ct.c0.degree, level));
  ByteWriter w(out);
  w.Magic({kCiphertextMagic, 4});
  w.Int<std::uint16_t>(kCiphertextVersion);
  w.Int<std::uint32_t>(static_cast<std::uint32_t>(ct.c0.degree));
  w.Int<std::uint8_t>(static_cast<std::uint8_t>(level));
  w.Int<std::uint8_t>(static_cast<std::uint8_t>(level + 1));
  w.F64(ct.scale);
  for (std::size_t i = 0; i <= static_cast<std::size_t>(level); ++i) {
    w.Int<std::uint64_t>(ctx.prime(i));
    for (u64 c : ct.c0.component(i)) w.Int<std::uint64_t>(c);
    for (u64 c : ct.c1.component(i)) w.Int<std::uint64_t>(c);
  }
}

inline Bytes SerializeCiphertext(const CkksContext& ctx, const Ciphertext& ct) {
  Bytes out;
  SerializeCiphertext(ctx, ct, out);
  return out;
}

// Reads one ciphertext from `r`, validating it against `ctx`.
inline Ciphertext ReadCiphertext(const CkksContext& ctx, ByteReader& r) {
  r.ExpectMagic({kCiphertextMagic, 4});
  const auto version = r.Int<std::uint16_t>();
  Require(version == kCiphertextVersion, ErrorCode::kFormat,
          "unsupported ciphertext version " + std::to_string(version));
  const auto degree = r.Int<std::uint32_t>();
  Require(degree == ctx.degree(), ErrorCode::kFormat, "poly_degree does not match parameters");
  const int level = r.Int<std::uint8_t>();
  const int count = r.Int<std::uint8_t>();
  Require(level <= ctx.top_level() && count == level + 1, ErrorCode::kFormat,
          "level/modulus count inconsistent with parameters");
  const double scale = r.F64();
  Require(scale > 0 && std::isfinite(scale), ErrorCode::kFormat, "invalid scale");
  Ciphertext ct{RingPoly(degree, level), RingPoly(degree, level), scale};
  for (std::size_t i = 0; i < static_cast<std::size_t>(count); ++i) {
    const u64 q = r.Int<std::uint64_t>();
    Require(q == ctx.prime(i), ErrorCode::kFormat, "modulus does not match parameters");
    for (auto& c : ct.c0.component(i)) {
      c = r.Int<std::uint64_t>();
      Require(c < q, ErrorCode::kFormat, "coefficient not reduced");
    }
    for (auto& c : ct.c1.component(i)) {
      c = r.Int<std::uint64_t>();
      Require(c < q, ErrorCode::kFormat, "coefficient not reduced");
    }
  }
  return ct;
}

inline Ciphertext DeserializeCiphertext(const CkksContext& ctx, std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Ciphertext ct = ReadCiphertext(ctx, r);
  Require(r.done(), ErrorCode::kFormat, "trailing bytes after ciphertext");
  return ct;
}

}  // namespace fedshield::ckks

#endif  // FEDSHIELD_CKKS_SERIALIZE_HPP_
