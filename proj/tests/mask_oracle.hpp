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

// Brute-force mask oracles: full sort and exhaustive subset enumeration.
// Independent of the partial-selection path used by the library.

#ifndef FEDSHIELD_TESTS_MASK_ORACLE_HPP_
#define FEDSHIELD_TESTS_MASK_ORACLE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace fedshield::testing_support {

inline std::size_t PrunedCount(double p, std::size_t n) {
  return static_cast<std::size_t>(std::floor(p * static_cast<double>(n) + 1e-9));
}

inline std::vector<std::uint8_t> SortOracleMask(const std::vector<double>& v, double p) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return std::abs(v[a]) < std::abs(v[b]); });
  std::vector<std::uint8_t> keep(v.size(), 1);
  for (std::size_t i = 0; i < PrunedCount(p, v.size()); ++i) keep[idx[i]] = 0;
  return keep;
}

// Enumerates every k-subset of pruned positions in lexicographic order and
// returns the first one minimizing the squared pruning error.
inline std::vector<std::uint8_t> ExhaustiveL2Mask(const std::vector<double>& v, double p) {
  const std::size_t n = v.size();
  const std::size_t k = PrunedCount(p, n);
  std::vector<std::uint8_t> best(n, 1);
  double best_cost = INFINITY;
  for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
    if (static_cast<std::size_t>(__builtin_popcount(bits)) != k) continue;
    double cost = 0;
    std::vector<std::uint8_t> keep(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      if (bits & (1u << i)) {
        cost += v[i] * v[i];
        keep[i] = 0;
      }
    }
    // Lexicographic order on sorted pruned-index lists: compare candidates
    // with equal cost explicitly.
    auto pruned_list = [](const std::vector<std::uint8_t>& m) {
      std::vector<std::size_t> out;
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (!m[i]) out.push_back(i);
      }
      return out;
    };
    if (cost < best_cost || (cost == best_cost && pruned_list(keep) < pruned_list(best))) {
      best_cost = cost;
      best = keep;
    }
  }
  return best;
}

inline double KeptL1(const std::vector<double>& v, const std::vector<std::uint8_t>& keep) {
  double s = 0;
  for (std::size_t i = 0; i < v.size(); ++i) s += keep[i] ? std::abs(v[i]) : 0.0;
  return s;
}

inline double MaxKeptL1(const std::vector<double>& v, double p) {
  const std::size_t n = v.size();
  const std::size_t k = PrunedCount(p, n);
  double best = -1;
  for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
    if (static_cast<std::size_t>(__builtin_popcount(bits)) != k) continue;
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += (bits & (1u << i)) ? 0.0 : std::abs(v[i]);
    best = std::max(best, s);
  }
  return best;
}

struct SmallTensorDraw {
  std::vector<double> values;
  double rate = 0;
};

// Length 1..12; half the draws use small integers so magnitude ties occur.
inline SmallTensorDraw RandomSmallTensor(std::mt19937_64& rng) {
  SmallTensorDraw d;
  const std::size_t n = 1 + rng() % 12;
  const bool integers = rng() % 2 == 0;
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> small(-3, 3);
  for (std::size_t i = 0; i < n; ++i) d.values.push_back(integers ? small(rng) : normal(rng));
  d.rate = std::uniform_real_distribution<double>(0.0, 0.95)(rng);
  return d;
}

}  // namespace fedshield::testing_support

#endif  // FEDSHIELD_TESTS_MASK_ORACLE_HPP_
