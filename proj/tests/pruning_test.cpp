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

#include "fedshield/pruning/pruning.hpp"

#include <bit>
#include <cmath>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "mask_oracle.hpp"

namespace fedshield::pruning {
namespace {

FactorList SingleTensor(const std::vector<double>& values) {
  Matrix a(1, static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) a(0, static_cast<Eigen::Index>(i)) = values[i];
  return FactorList{{a, Matrix::Zero(1, 1)}};
}

const PruneSchedule kDeploymentSchedule{0.2, 0.5, 0, 200};

TEST(ScheduleTest, DeploymentScheduleValues) {
  EXPECT_EQ(ScheduleRate(kDeploymentSchedule, 0), 0.2);
  EXPECT_EQ(ScheduleRate(kDeploymentSchedule, 100), 0.35);
  EXPECT_EQ(ScheduleRate(kDeploymentSchedule, 200), 0.5);
  EXPECT_EQ(ScheduleRate(kDeploymentSchedule, 400), 0.5);
}

TEST(ScheduleTest, HoldsInitialRateUntilStartRound) {
  const PruneSchedule s{0.1, 0.7, 20, 40};
  EXPECT_EQ(ScheduleRate(s, 1), 0.1);
  EXPECT_EQ(ScheduleRate(s, 20), 0.1);
  EXPECT_NEAR(ScheduleRate(s, 30), 0.4, 1e-15);
  EXPECT_EQ(ScheduleRate(s, 40), 0.7);
}

TEST(ScheduleTest, MonotoneAndBounded) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = unit(rng);
    const double b = unit(rng);
    const int t_eff = static_cast<int>(rng() % 50);
    const PruneSchedule s{std::min(a, b), std::max(a, b), t_eff, t_eff + 1 + static_cast<int>(rng() % 300)};
    double prev = -1;
    for (int t = 0; t < 500; ++t) {
      const double p = ScheduleRate(s, t);
      EXPECT_GE(p, s.p0);
      EXPECT_LE(p, s.p_target);
      EXPECT_GE(p, prev);
      prev = p;
    }
  }
}

TEST(ScheduleTest, RejectsInvalidSchedules) {
  EXPECT_THROW(ScheduleRate(PruneSchedule{0.6, 0.5, 0, 10}, 1), Error);
  EXPECT_THROW(ScheduleRate(PruneSchedule{0.2, 0.5, 10, 10}, 1), Error);
  EXPECT_THROW(ScheduleRate(PruneSchedule{0.2, 1.5, 0, 10}, 1), Error);
}

TEST(MaskTest, HandExampleMatchesSortOracle) {
  const std::vector<double> v = {0.1, -0.5, 0.3, -0.05};
  const auto mask = ComputeMask(SingleTensor(v), 0.5);
  EXPECT_EQ(mask.keep[0], (std::vector<std::uint8_t>{0, 1, 1, 0}));
  EXPECT_EQ(mask.keep[0], testing_support::SortOracleMask(v, 0.5));
}

TEST(MaskTest, ZeroRateKeepsEverything) {
  const auto mask = ComputeMask(SingleTensor({0.0, 1.0, -2.0}), 0.0);
  EXPECT_EQ(mask.keep[0], (std::vector<std::uint8_t>{1, 1, 1}));
  EXPECT_EQ(mask.keep[1], (std::vector<std::uint8_t>{1}));
}

TEST(MaskTest, TiesBreakByLowestIndex) {
  const auto mask = ComputeMask(SingleTensor({0.7, 0.7, -0.7, 0.7}), 0.5);
  EXPECT_EQ(mask.keep[0], (std::vector<std::uint8_t>{0, 0, 1, 1}));
}

TEST(MaskTest, RejectsRateOfOne) {
  try {
    ComputeMask(SingleTensor({1.0}), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParameter);
  }
  EXPECT_THROW(ComputeMask(SingleTensor({1.0}), -0.1), Error);
}

TEST(MaskTest, PrunedCountIsExactFloor) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (double p : {0.0, 0.2, 0.35, 0.5, 0.7, 0.9, 0.99}) {
    for (Eigen::Index rows : {1, 3, 7, 20}) {
      FactorList t{{Matrix(rows, 5), Matrix(5, rows + 1)}};
      for (Matrix* m : lora::Tensors(t)) {
        for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = normal(rng);
      }
      const auto mask = ComputeMask(t, p);
      for (std::size_t k = 0; k < 2; ++k) {
        const std::size_t len = mask.shapes[k].size();
        EXPECT_EQ(mask.PrunedCount(k), static_cast<std::size_t>(std::floor(p * len + 1e-9)));
        EXPECT_LE(std::abs(mask.RealizedSparsity(k) - p), 1.0 / static_cast<double>(len));
      }
    }
  }
}

TEST(MaskTest, MatchesExhaustiveOracleOnSmallTensors) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const auto draw = testing_support::RandomSmallTensor(rng);
    const auto mask = ComputeMask(SingleTensor(draw.values), draw.rate);
    EXPECT_EQ(mask.keep[0], testing_support::ExhaustiveL2Mask(draw.values, draw.rate)) << "trial " << trial;
  }
}

TEST(MaskTest, KeptL1MassDominatesEveryEqualSparsityMask) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const auto draw = testing_support::RandomSmallTensor(rng);
    const auto keep = ComputeMask(SingleTensor(draw.values), draw.rate).keep[0];
    EXPECT_DOUBLE_EQ(testing_support::KeptL1(draw.values, keep), testing_support::MaxKeptL1(draw.values, draw.rate));
  }
}

TEST(ApplyMaskTest, IdentityZeroAndIdempotence) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  FactorList t{{Matrix(4, 3), Matrix(3, 2)}};
  for (Matrix* m : lora::Tensors(t)) {
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = normal(rng);
  }
  const auto all = ComputeMask(t, 0.0);
  EXPECT_EQ(lora::Flatten(ApplyMask(t, all)), lora::Flatten(t));

  PruneMask none = all;
  for (auto& k : none.keep) std::fill(k.begin(), k.end(), 0);
  EXPECT_EQ(lora::SquaredNorm(ApplyMask(t, none)), 0.0);

  const auto mask = ComputeMask(t, 0.5);
  const auto once = ApplyMask(t, mask);
  EXPECT_EQ(lora::Flatten(ApplyMask(once, mask)), lora::Flatten(once));
  const auto flat = lora::Flatten(t);
  const auto pruned = lora::Flatten(once);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (pruned[i] != 0.0) {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(pruned[i]), std::bit_cast<std::uint64_t>(flat[i]));
      ++kept;
    }
  }
  EXPECT_EQ(kept, 6u + 3u);
}

TEST(ApplyMaskTest, ShapeMismatchIsRejected) {
  const auto mask = ComputeMask(SingleTensor({1, 2, 3}), 0.3);
  try {
    ApplyMask(SingleTensor({1, 2}), mask);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
  }
}

TEST(PruningErrorTest, Values) {
  const auto t = SingleTensor({0.1, -0.5, 0.3, -0.05});
  EXPECT_EQ(PruningErrorNorm(t, t), 0.0);
  const auto zero = SingleTensor({0, 0, 0, 0});
  EXPECT_EQ(PruningErrorNorm(zero, ApplyMask(zero, ComputeMask(zero, 0.5))), 0.0);
  const auto pruned = ApplyMask(t, ComputeMask(t, 0.5));
  EXPECT_NEAR(PruningErrorNorm(t, pruned), std::sqrt(0.1 * 0.1 + 0.05 * 0.05), 1e-15);
  EXPECT_THROW(PruningErrorNorm(t, SingleTensor({1})), Error);
}

TEST(ProductRefitTest, ReturnsBestRankRApproximationOfMaskedProduct) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal;
  FactorList deltas{{Matrix(6, 2), Matrix(2, 5)}};
  for (Matrix* m : lora::Tensors(deltas)) {
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = normal(rng);
  }
  const double p = 0.5;
  const auto refit = PruneProductRefit(deltas, p);
  ASSERT_EQ(lora::Shapes(refit), lora::Shapes(deltas));

  Matrix masked = deltas[0].a * deltas[0].b;
  const auto keep = MagnitudeMask(std::span<const double>(masked.data(), static_cast<std::size_t>(masked.size())), p);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (!keep[i]) masked.data()[i] = 0.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(masked);
  const auto sv = svd.singularValues();
  const double tail = std::sqrt(sv.tail(sv.size() - 2).squaredNorm());
  EXPECT_NEAR((refit[0].a * refit[0].b - masked).norm(), tail, 1e-10);
}

}  // namespace
}  // namespace fedshield::pruning
