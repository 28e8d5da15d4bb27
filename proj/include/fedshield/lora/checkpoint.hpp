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

// Adapter checkpoint layout (little-endian):
//
//   "FSLA" | version u16 | adapter count u32 |
//   per adapter: layer id u32 | r u32 | d_in u32 | d_out u32 | alpha f64 |
//                A (d_in * r f64, row-major) | B (r * d_out f64, row-major)

#ifndef FEDSHIELD_LORA_CHECKPOINT_HPP_
#define FEDSHIELD_LORA_CHECKPOINT_HPP_

#include <fstream>
#include <iterator>
#include <string>

#include "fedshield/common/bytes.hpp"
#include "fedshield/lora/model.hpp"

namespace fedshield::lora {

inline constexpr std::uint16_t kCheckpointVersion = 1;

inline Bytes SerializeAdapters(const AdapterSet& adapters) {
  Bytes out;
  ByteWriter w(out);
  w.Magic("FSLA");
  w.Int<std::uint16_t>(kCheckpointVersion);
  w.Int<std::uint32_t>(static_cast<std::uint32_t>(adapters.adapters.size()));
  for (std::size_t l = 0; l < adapters.adapters.size(); ++l) {
    const auto& ad = adapters.adapters[l];
    w.Int<std::uint32_t>(static_cast<std::uint32_t>(l));
    w.Int<std::uint32_t>(static_cast<std::uint32_t>(ad.rank));
    w.Int<std::uint32_t>(static_cast<std::uint32_t>(ad.a.rows()));
    w.Int<std::uint32_t>(static_cast<std::uint32_t>(ad.b.cols()));
    w.F64(ad.alpha);
    for (Eigen::Index i = 0; i < ad.a.size(); ++i) w.F64(ad.a.data()[i]);
    for (Eigen::Index i = 0; i < ad.b.size(); ++i) w.F64(ad.b.data()[i]);
  }
  return out;
}

inline AdapterSet DeserializeAdapters(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.ExpectMagic("FSLA");
  const auto version = r.Int<std::uint16_t>();
  Require(version == kCheckpointVersion, ErrorCode::kFormat, "unsupported checkpoint version");
  const auto count = r.Int<std::uint32_t>();
  AdapterSet set;
  for (std::uint32_t l = 0; l < count; ++l) {
    Require(r.Int<std::uint32_t>() == l, ErrorCode::kFormat, "adapters out of order");
    LoraAdapter ad;
    ad.rank = static_cast<int>(r.Int<std::uint32_t>());
    const auto d_in = r.Int<std::uint32_t>();
    const auto d_out = r.Int<std::uint32_t>();
    ad.alpha = r.F64();
    Require(ad.rank >= 1 && d_in >= 1 && d_out >= 1, ErrorCode::kFormat, "invalid adapter dimensions");
    Require(r.remaining() >= 8ull * ad.rank * (d_in + d_out), ErrorCode::kFormat, "truncated input");
    ad.a = Matrix(d_in, ad.rank);
    ad.b = Matrix(ad.rank, d_out);
    for (Eigen::Index i = 0; i < ad.a.size(); ++i) ad.a.data()[i] = r.F64();
    for (Eigen::Index i = 0; i < ad.b.size(); ++i) ad.b.data()[i] = r.F64();
    set.adapters.push_back(std::move(ad));
  }
  Require(r.done(), ErrorCode::kFormat, "trailing bytes after checkpoint");
  return set;
}

inline void WriteBytes(const std::string& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary);
  Require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline Bytes ReadBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorCode::kIo, "cannot read " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void SaveCheckpoint(const std::string& path, const AdapterSet& adapters) {
  WriteBytes(path, SerializeAdapters(adapters));
}

inline AdapterSet LoadCheckpoint(const std::string& path) { return DeserializeAdapters(ReadBytes(path)); }

}  // namespace fedshield::lora

#endif  // FEDSHIELD_LORA_CHECKPOINT_HPP_
