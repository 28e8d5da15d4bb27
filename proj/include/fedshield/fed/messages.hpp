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


// Slot packing of adapter updates and the client-to-server update message.
//
// Wire format (little-endian):
//   "FSUM" | u16 version | u32 client | u32 round | u8 kind | u32 samples |
//   u32 tensor count | per tensor: u32 rows, u32 cols | u32 slot count |
//   kind 0 (encrypted): u32 ciphertext count, per ciphertext u64 length + FSHE bytes
//   kind 1 (plaintext): f64 values, one per packed entry

#ifndef FEDSHIELD_FED_MESSAGES_HPP_
#define FEDSHIELD_FED_MESSAGES_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "fedshield/ckks/ckks.hpp"
#include "fedshield/common/bytes.hpp"
#include "fedshield/lora/tensors.hpp"

namespace fedshield::fed {

using lora::FactorList;
using lora::TensorShape;

/// Tensors are flattened row-major in Shapes() order, concatenated, and cut
/// into ceil(len / slot_count) chunks; the last chunk is zero-padded.
struct PackingDescriptor {
  std::vector<TensorShape> shapes;
  std::size_t slot_count = 0;

  std::size_t total_length() const {
    std::size_t n = 0;
    for (const auto& s : shapes) n += s.size();
    return n;
  }

  std::size_t ciphertext_count() const { return CiphertextCount(total_length(), slot_count); }

  static std::size_t CiphertextCount(std::size_t length, std::size_t slots) {
    Require(slots >= 1, ErrorCode::kParameter, "slot count must be >= 1");
    return (length + slots - 1) / slots;
  }

  friend bool operator==(const PackingDescriptor&, const PackingDescriptor&) = default;
};

inline PackingDescriptor DescribePacking(const FactorList& update, std::size_t slot_count) {
  return PackingDescriptor{lora::Shapes(update), slot_count};
}

/// Splits the flattened update into slot-sized chunks.
inline std::vector<std::vector<double>> Pack(const FactorList& update, const PackingDescriptor& desc) {
  Require(lora::Shapes(update) == desc.shapes, ErrorCode::kShape, "update does not match packing descriptor");
  const auto flat = lora::Flatten(update);
  std::vector<std::vector<double>> chunks;
  for (std::size_t begin = 0; begin < flat.size(); begin += desc.slot_count) {
    std::vector<double> chunk(desc.slot_count, 0.0);
    const std::size_t len = std::min(desc.slot_count, flat.size() - begin);
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(begin), len, chunk.begin());
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

/// Inverse of Pack; padding slots are dropped.
inline FactorList Unpack(const std::vector<std::vector<double>>& chunks, const PackingDescriptor& desc) {
  Require(chunks.size() == desc.ciphertext_count(), ErrorCode::kShape, "chunk count does not match descriptor");
  const std::size_t total = desc.total_length();
  std::vector<double> flat;
  flat.reserve(total);
  for (const auto& c : chunks) {
    Require(c.size() >= std::min(desc.slot_count, total - flat.size()), ErrorCode::kShape, "short chunk");
    const std::size_t take = std::min(desc.slot_count, total - flat.size());
    flat.insert(flat.end(), c.begin(), c.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return lora::Unflatten(flat, desc.shapes);
}

enum class PayloadKind : std::uint8_t { kEncrypted = 0, kPlaintext = 1 };

struct UpdateMessage {
  std::uint32_t client_id = 0;
  std::uint32_t round = 0;
  std::uint32_t samples = 0;  // local dataset size, for data-size weighting
  PayloadKind kind = PayloadKind::kPlaintext;
  PackingDescriptor packing;
  std::vector<Bytes> ciphertexts;  // serialized FSHE blobs (encrypted)
  std::vector<double> values;      // flattened update (plaintext)
};

inline constexpr std::uint16_t kMessageVersion = 1;

inline Bytes SerializeMessage(const UpdateMessage& m) {
  Bytes out;
  ByteWriter w(out);
  w.Magic("FSUM");
  w.Int<std::uint16_t>(kMessageVersion);
  w.Int<std::uint32_t>(m.client_id);
  w.Int<std::uint32_t>(m.round);
  w.Int<std::uint8_t>(static_cast<std::uint8_t>(m.kind));
  w.Int<std::uint32_t>(m.samples);
  w.Int<std::uint32_t>(static_cast<std::uint32_t>(m.packing.shapes.size()));
  for (const auto& s : m.packing.shapes) {
    w.Int<std::uint32_t>(static_cast<std::uint32_t>(s.rows));
    w.Int<std::uint32_t>(static_cast<std::uint32_t>(s.cols));
  }
  w.Int<std::uint32_t>(static_cast<std::uint32_t>(m.packing.slot_count));
  if (m.kind == PayloadKind::kEncrypted) {
    Require(m.values.empty(), ErrorCode::kState, "encrypted message must not carry plaintext values");
    w.Int<std::uint32_t>(static_cast<std::uint32_t>(m.ciphertexts.size()));
    for (const auto& ct : m.ciphertexts) {
      w.Int<std::uint64_t>(ct.size());
      w.Raw(ct);
    }
  } else {
    Require(m.values.size() == m.packing.total_length(), ErrorCode::kShape, "plaintext payload length mismatch");
    for (double v : m.values) w.F64(v);
  }
  return out;
}

inline UpdateMessage DeserializeMessage(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.ExpectMagic("FSUM");
  Require(r.Int<std::uint16_t>() == kMessageVersion, ErrorCode::kFormat, "unsupported message version");
  UpdateMessage m;
  m.client_id = r.Int<std::uint32_t>();
  m.round = r.Int<std::uint32_t>();
  const auto kind = r.Int<std::uint8_t>();
  Require(kind <= 1, ErrorCode::kFormat, "unknown payload kind");
  m.kind = static_cast<PayloadKind>(kind);
  m.samples = r.Int<std::uint32_t>();
  const auto tensors = r.Int<std::uint32_t>();
  Require(r.remaining() / 8 >= tensors, ErrorCode::kFormat, "truncated input");
  for (std::uint32_t i = 0; i < tensors; ++i) {
    TensorShape s;
    s.rows = r.Int<std::uint32_t>();
    s.cols = r.Int<std::uint32_t>();
    m.packing.shapes.push_back(s);
  }
  m.packing.slot_count = r.Int<std::uint32_t>();
  Require(m.packing.slot_count >= 1, ErrorCode::kFormat, "slot count must be >= 1");
  if (m.kind == PayloadKind::kEncrypted) {
    const auto count = r.Int<std::uint32_t>();
    Require(count == m.packing.ciphertext_count(), ErrorCode::kFormat, "ciphertext count does not match packing");
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto len = r.Int<std::uint64_t>();
      Require(len <= r.remaining(), ErrorCode::kFormat, "truncated input");
      const auto raw = r.Raw(static_cast<std::size_t>(len));
      m.ciphertexts.emplace_back(raw.begin(), raw.end());
    }
  } else {
    const std::size_t n = m.packing.total_length();
    Require(r.remaining() / 8 >= n, ErrorCode::kFormat, "truncated input");
    m.values.resize(n);
    for (auto& v : m.values) v = r.F64();
  }
  Require(r.done(), ErrorCode::kFormat, "trailing bytes after message");
  return m;
}

}  // namespace fedshield::fed

#endif  // FEDSHIELD_FED_MESSAGES_HPP_
