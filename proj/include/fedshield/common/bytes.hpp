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

// Little-endian byte encoding helpers shared by the wire formats.

#ifndef FEDSHIELD_COMMON_BYTES_HPP_
#define FEDSHIELD_COMMON_BYTES_HPP_

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "fedshield/common/error.hpp"

namespace fedshield {

using Bytes = std::vector<std::uint8_t>;

class ByteWriter {
 public:
  explicit ByteWriter(Bytes& out) : out_(out) {}

  void Magic(std::string_view tag) {
    out_.insert(out_.end(), tag.begin(), tag.end());
  }

  template <typename T>
    requires std::is_integral_v<T>
  void Int(T value) {
    using U = std::make_unsigned_t<T>;
    auto bits = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>(bits & 0xFFu));
      if constexpr (sizeof(T) > 1) bits = static_cast<U>(bits >> 8);
    }
  }

  void F64(double value) { Int(std::bit_cast<std::uint64_t>(value)); }

  void Raw(std::span<const std::uint8_t> data) {
    out_.insert(out_.end(), data.begin(), data.end());
  }

 private:
  Bytes& out_;
};

// Bounds-checked reader; any overrun raises a format error.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  void ExpectMagic(std::string_view tag) {
    Need(tag.size());
    if (std::memcmp(data_.data() + pos_, tag.data(), tag.size()) != 0) {
      Fail(ErrorCode::kFormat, "bad magic, expected '" + std::string(tag) + "'");
    }
    pos_ += tag.size();
  }

  template <typename T>
    requires std::is_integral_v<T>
  T Int() {
    using U = std::make_unsigned_t<T>;
    Need(sizeof(T));
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bits = static_cast<U>(bits | (static_cast<U>(data_[pos_ + i]) << (8 * i)));
    }
    pos_ += sizeof(T);
    return static_cast<T>(bits);
  }

  double F64() { return std::bit_cast<double>(Int<std::uint64_t>()); }

  std::span<const std::uint8_t> Raw(std::size_t n) {
    Need(n);
    auto view = data_.subspan(pos_, n);
    pos_ += n;
    return view;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  void Need(std::size_t n) const {
    if (data_.size() - pos_ < n) Fail(ErrorCode::kFormat, "truncated input");
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace fedshield

#endif  // FEDSHIELD_COMMON_BYTES_HPP_
