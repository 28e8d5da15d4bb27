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

#ifndef FEDSHIELD_COMMON_SEED_HPP_
#define FEDSHIELD_COMMON_SEED_HPP_

#include <cstdint>
#include <initializer_list>

namespace fedshield {

// Stream tags keep independent random streams apart when deriving seeds.
enum class Stream : std::uint64_t {
  kKeygen = 1,
  kSelect,
  kTrain,
  kMask,
  kEncrypt,
  kDp,
  kDropout,
  kData,
  kValidation,
  kModel,
  kAttack,
};

inline std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Derives a child seed from a base seed, a stream tag and extra indices
// (round, client, ciphertext index, ...). Independent of call order.
inline std::uint64_t DeriveSeed(std::uint64_t base, Stream stream,
                                std::initializer_list<std::uint64_t> path = {}) {
  std::uint64_t h = SplitMix64(base ^ SplitMix64(static_cast<std::uint64_t>(stream)));
  for (std::uint64_t v : path) h = SplitMix64(h ^ SplitMix64(v + 0x1234567ull));
  return h;
}

}  // namespace fedshield

#endif  // FEDSHIELD_COMMON_SEED_HPP_
