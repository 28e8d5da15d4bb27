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


#include "fedshield/fed/fed.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <set>
#include <vector>

#include "gtest/gtest.h"

namespace fedshield::fed {
namespace {

using lora::Matrix;

FactorList Scalar(double v) {
  Matrix a(1, 1);
  a(0, 0) = v;
  return FactorList{{a, Matrix::Zero(1, 1)}};
}

FactorList RandomUpdate(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  FactorList u{{Matrix(8, 2), Matrix(2, 4)}, {Matrix(4, 2), Matrix(2, 3)}};
  for (Matrix* m : lora::Tensors(u)) {
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = normal(rng);
  }
  return u;
}

double MaxAbsDiff(const FactorList& x, const FactorList& y) {
  const auto a = lora::Flatten(x);
  const auto b = lora::Flatten(y);
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double MaxAbsDiff(const lora::AdapterSet& x, const lora::AdapterSet& y) { return MaxAbsDiff(x.Factors(), y.Factors()); }

RunConfig SmallConfig(Mode mode) {
  RunConfig c;
  c.mode = mode;
  c.rounds = 3;
  c.seed = 11;
  c.model.layer_sizes = {8, 4};
  c.model.ranks = {2};
  c.model.alpha = 2;
  c.model.hidden_activation = lora::Activation::kIdentity;
  c.samples_per_client = 32;
  c.validation_size = 64;
  c.train.lr = 0.01;
  c.train.batch_size = 8;
  return c;
}

TEST(SelectClientsTest, Examples) {
  EXPECT_EQ(SelectClients(5, 5, 3, 1), (std::vector<int>{0, 1, 2, 3, 4}));
  EXPECT_EQ(SelectClients(1, 1, 1, 9), (std::vector<int>{0}));
  EXPECT_EQ(SelectClients(10, 3, 7, 42), SelectClients(10, 3, 7, 42));
  EXPECT_THROW(SelectClients(3, 4, 1, 1), Error);
  EXPECT_THROW(SelectClients(3, 0, 1, 1), Error);
}

TEST(SelectClientsTest, DistinctAndRoughlyUniform) {
  std::vector<int> counts(10, 0);
  const int rounds = 5000;
  for (int t = 1; t <= rounds; ++t) {
    const auto ids = SelectClients(10, 3, t, 5);
    ASSERT_EQ(std::set<int>(ids.begin(), ids.end()).size(), 3u);
    for (int id : ids) ++counts[static_cast<std::size_t>(id)];
  }
  for (int c : counts) EXPECT_NEAR(c, rounds * 3 / 10, 120);  // ~3.7 sigma
}

TEST(AggregatePlainTest, IdenticalUpdatesAreReturnedExactly) {
  std::mt19937_64 rng(1);
  const auto u = RandomUpdate(rng);
  for (std::size_t k : {1u, 3u, 7u}) {
    const std::vector<FactorList> copies(k, u);
    EXPECT_EQ(lora::Flatten(AggregatePlain(copies)), lora::Flatten(u)) << k;
  }
}

TEST(AggregatePlainTest, HandExamples) {
  const std::vector<FactorList> two = {Scalar(2), Scalar(4)};
  EXPECT_EQ(AggregatePlain(two)[0].a(0, 0), 3.0);
  const std::vector<FactorList> weighted = {Scalar(0), Scalar(4)};
  const std::vector<double> w = {0.75, 0.25};
  EXPECT_EQ(AggregatePlain(weighted, w)[0].a(0, 0), 1.0);
}

TEST(AggregatePlainTest, Errors) {
  EXPECT_THROW(AggregatePlain(std::vector<FactorList>{}), Error);
  std::mt19937_64 rng(2);
  const std::vector<FactorList> mismatched = {Scalar(1), RandomUpdate(rng)};
  EXPECT_THROW(AggregatePlain(mismatched), Error);
  const std::vector<FactorList> two = {Scalar(2), Scalar(4)};
  const std::vector<double> bad = {0.5, 0.6};
  EXPECT_THROW(AggregatePlain(two, bad), Error);
}

TEST(DpPrivatizeTest, ZeroSigmaClipsOnly) {
  std::mt19937_64 rng(3);
  const auto u = RandomUpdate(rng);
  const double norm = lora::L2Norm(u);
  const auto clipped = DpPrivatize(u, norm / 4, 0.0, 1);
  EXPECT_NEAR(lora::L2Norm(clipped), norm / 4, 1e-12);
  const auto a = lora::Flatten(u);
  const auto b = lora::Flatten(clipped);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], a[i] / 4, 1e-15);
  EXPECT_EQ(lora::Flatten(DpPrivatize(u, norm * 2, 0.0, 1)), a);
}

TEST(DpPrivatizeTest, NoiseHasRequestedStd) {
  FactorList zero{{Matrix::Zero(1000, 50), Matrix::Zero(50, 1000)}};
  const double clip = 1.0;
  const double sigma = 0.5;
  const auto noisy = lora::Flatten(DpPrivatize(zero, clip, sigma, 77));
  double mean = 0;
  for (double v : noisy) mean += v;
  mean /= static_cast<double>(noisy.size());
  double var = 0;
  for (double v : noisy) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(noisy.size() - 1));
  EXPECT_NEAR(sd, sigma * clip, 0.05 * sigma * clip);
  EXPECT_NEAR(mean, 0.0, 5 * sigma / std::sqrt(static_cast<double>(noisy.size())));
  EXPECT_EQ(lora::Flatten(DpPrivatize(zero, clip, sigma, 77)), noisy);
}

TEST(PackingTest, CiphertextCountIsCeiling) {
  EXPECT_EQ(PackingDescriptor::CiphertextCount(30'000'000, 8192), 3663u);
  EXPECT_EQ(PackingDescriptor::CiphertextCount(0, 8192), 0u);
  EXPECT_EQ(PackingDescriptor::CiphertextCount(8192, 8192), 1u);
  EXPECT_EQ(PackingDescriptor::CiphertextCount(8193, 8192), 2u);
}

TEST(PackingTest, RoundTripAndPadding) {
  std::mt19937_64 rng(4);
  const auto u = RandomUpdate(rng);  // 16 + 8 + 8 + 6 = 38 entries
  for (std::size_t slots : {1u, 5u, 38u, 64u}) {
    const auto desc = DescribePacking(u, slots);
    const auto chunks = Pack(u, desc);
    ASSERT_EQ(chunks.size(), (38 + slots - 1) / slots);
    for (const auto& c : chunks) ASSERT_EQ(c.size(), slots);
    const std::size_t padded = chunks.size() * slots - 38;
    for (std::size_t i = 0; i < padded; ++i) EXPECT_EQ(chunks.back()[slots - 1 - i], 0.0);
    EXPECT_EQ(lora::Flatten(Unpack(chunks, desc)), lora::Flatten(u));
  }
}

TEST(MessageTest, PlaintextRoundTrip) {
  std::mt19937_64 rng(5);
  const auto u = RandomUpdate(rng);
  const auto m = MakePlaintextMessage(u, 2, 9, 64, 2048);
  const auto bytes = SerializeMessage(m);
  EXPECT_EQ(std::memcmp(bytes.data(), "FSUM", 4), 0);
  const auto back = DeserializeMessage(bytes);
  EXPECT_EQ(back.client_id, 2u);
  EXPECT_EQ(back.round, 9u);
  EXPECT_EQ(back.samples, 64u);
  EXPECT_EQ(back.packing, m.packing);
  EXPECT_EQ(back.values, m.values);
  EXPECT_EQ(SerializeMessage(back), bytes);
}

TEST(MessageTest, MalformedInputIsRejected) {
  std::mt19937_64 rng(6);
  const auto bytes = SerializeMessage(MakePlaintextMessage(RandomUpdate(rng), 0, 1, 1, 16));
  auto expect_format = [](const Bytes& b) {
    try {
      DeserializeMessage(b);
      FAIL() << "accepted malformed message";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kFormat);
    }
  };
  Bytes bad_magic = bytes;
  bad_magic[0] = 'X';
  expect_format(bad_magic);
  Bytes bad_version = bytes;
  bad_version[4] = 9;
  expect_format(bad_version);
  expect_format(Bytes(bytes.begin(), bytes.end() - 1));
  Bytes trailing = bytes;
  trailing.push_back(0);
  expect_format(trailing);
}

class EncryptedAggregationTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    authority_ = new KeyAuthority(ckks::CkksContext::Create(ckks::CkksParams{}), 21);
  }
  static void TearDownTestSuite() {
    delete authority_;
    authority_ = nullptr;
  }

  const ckks::CkksContext& ctx() const { return *authority_->context(); }

  std::vector<UpdateMessage> Encrypt(const std::vector<FactorList>& updates, std::uint32_t round = 1) const {
    const ckks::Encryptor enc(ctx(), authority_->public_key());
    std::vector<UpdateMessage> out;
    for (std::size_t i = 0; i < updates.size(); ++i) {
      const auto m = MakeEncryptedMessage(ctx(), enc, updates[i], static_cast<std::uint32_t>(i), round, 10, 100 + i);
      out.push_back(DeserializeMessage(SerializeMessage(m)));
    }
    return out;
  }

  static KeyAuthority* authority_;
};

KeyAuthority* EncryptedAggregationTest::authority_ = nullptr;

TEST_F(EncryptedAggregationTest, SingleClientDecryptsToItsUpdate) {
  std::mt19937_64 rng(7);
  const std::vector<FactorList> updates = {RandomUpdate(rng)};
  const auto agg = AggregateEncrypted(ctx(), Encrypt(updates), UniformWeights(1));
  EXPECT_LT(MaxAbsDiff(authority_->DecryptAggregate(agg), updates[0]), 1e-6);
  EXPECT_EQ(agg.ciphertexts()[0].level(), ctx().top_level() - 1);
}

TEST_F(EncryptedAggregationTest, MeanMatchesPlaintextAggregation) {
  std::mt19937_64 rng(8);
  const std::vector<FactorList> updates = {RandomUpdate(rng), RandomUpdate(rng), RandomUpdate(rng)};
  const auto messages = Encrypt(updates);
  const auto weights = UniformWeights(3);
  const auto expected = AggregatePlain(updates, weights);
  EXPECT_LT(MaxAbsDiff(authority_->DecryptAggregate(AggregateEncrypted(ctx(), messages, weights)), expected), 1e-3);
  EXPECT_LT(MaxAbsDiff(authority_->DecryptAggregate(AggregateEncrypted(ctx(), messages, weights, true)), expected),
            1e-3);
  const std::vector<double> skewed = {0.5, 0.3, 0.2};
  EXPECT_LT(MaxAbsDiff(authority_->DecryptAggregate(AggregateEncrypted(ctx(), messages, skewed)),
                       AggregatePlain(updates, skewed)),
            1e-3);
}

TEST_F(EncryptedAggregationTest, MismatchesAreRejected) {
  std::mt19937_64 rng(9);
  auto messages = Encrypt({RandomUpdate(rng), Scalar(1.0)});
  EXPECT_THROW(AggregateEncrypted(ctx(), messages, UniformWeights(2)), Error);
  auto a = Encrypt({RandomUpdate(rng)}, 1);
  auto b = Encrypt({RandomUpdate(rng)}, 2);
  const std::vector<UpdateMessage> rounds = {a[0], b[0]};
  EXPECT_THROW(AggregateEncrypted(ctx(), rounds, UniformWeights(2)), Error);
  const std::vector<UpdateMessage> plain = {MakePlaintextMessage(Scalar(1), 0, 1, 1, ctx().slot_count())};
  EXPECT_THROW(AggregateEncrypted(ctx(), plain, UniformWeights(1)), Error);
}

TEST_F(EncryptedAggregationTest, EncryptedPayloadCarriesNoPlaintextValues) {
  std::mt19937_64 rng(10);
  const auto u = RandomUpdate(rng);
  const auto bytes = SerializeMessage(Encrypt({u})[0]);
  for (double v : lora::Flatten(u)) {
    EXPECT_EQ(std::search(bytes.begin(), bytes.end(), reinterpret_cast<const std::uint8_t*>(&v),
                          reinterpret_cast<const std::uint8_t*>(&v) + 8),
              bytes.end());
  }
}

TEST_F(EncryptedAggregationTest, WrongDecodeScaleIsVisible) {
  std::mt19937_64 rng(11);
  const std::vector<FactorList> updates = {RandomUpdate(rng)};
  KeyAuthority skewed(authority_->context(), 21);
  skewed.set_decode_scale_factor(2.0);
  const auto agg = AggregateEncrypted(ctx(), Encrypt(updates), UniformWeights(1));
  EXPECT_GT(MaxAbsDiff(skewed.DecryptAggregate(agg), updates[0]), 0.1);
}

// Key separation: the server type has no way to obtain or accept a secret key.
template <typename T>
concept ExposesSecretKey = requires(const T& t) { t.secret_key(); };
static_assert(!std::is_constructible_v<ServerState, lora::AdapterSet, ckks::SecretKey>);
static_assert(!std::is_constructible_v<ServerState, lora::AdapterSet, std::optional<ckks::SecretKey>>);
static_assert(!ExposesSecretKey<ServerState>);
static_assert(!ExposesSecretKey<KeyAuthority>);

TEST(FederationTest, ZeroLearningRateLeavesGlobalUnchanged) {
  auto c = SmallConfig(Mode::kVanilla);
  c.n_clients = 1;
  c.clients_per_round = 1;
  c.train.lr = 0;
  Federation fed(c);
  const auto before = fed.server().global();
  fed.RunRound(1);
  EXPECT_EQ(lora::Flatten(fed.server().global().Factors()), lora::Flatten(before.Factors()));
  EXPECT_EQ(fed.server().round(), 1);
}

TEST(FederationTest, ScheduleDrivesRecordedRate) {
  auto c = SmallConfig(Mode::kFedShield);
  Federation fed(c);
  EXPECT_EQ(fed.RunRound(200).p_t, 0.5);
  auto v = SmallConfig(Mode::kVanilla);
  Federation plain(v);
  EXPECT_EQ(plain.RunRound(200).p_t, 0.0);
}

TEST(FederationTest, SingleRoundRunEqualsRunRound) {
  auto c = SmallConfig(Mode::kVanilla);
  c.rounds = 1;
  const auto metrics = RunTraining(c);
  Federation fed(c);
  const auto rec = fed.RunRound(1);
  ASSERT_EQ(metrics.rounds.size(), 1u);
  EXPECT_EQ(RoundToJsonLine(metrics.rounds[0], false), RoundToJsonLine(rec, false));
  EXPECT_EQ(lora::Flatten(metrics.final_adapters.Factors()), lora::Flatten(fed.server().global().Factors()));
}

TEST(FederationTest, EncryptedRunTracksPrunedPlaintextControl) {
  auto shielded = SmallConfig(Mode::kFedShield);
  shielded.rounds = 5;
  auto control = shielded;
  control.mode = Mode::kVanilla;
  control.prune_enabled = PruneToggle::kOn;
  Federation a(shielded);
  Federation b(control);
  for (int t = 1; t <= shielded.rounds; ++t) {
    a.RunRound(t);
    b.RunRound(t);
    EXPECT_LT(MaxAbsDiff(a.server().global(), b.server().global()), 1e-3) << "round " << t;
  }
  EXPECT_GT(MaxAbsDiff(a.server().global(), Federation(control).server().global()), 0.0);
}

TEST(FederationTest, ParallelClientsAreDeterministic) {
  auto c = SmallConfig(Mode::kFedShield);
  c.rounds = 2;
  const auto serial = RunTraining(c);
  c.threads = 3;
  const auto parallel = RunTraining(c);
  EXPECT_EQ(lora::Flatten(serial.final_adapters.Factors()), lora::Flatten(parallel.final_adapters.Factors()));
  for (std::size_t i = 0; i < serial.rounds.size(); ++i) {
    EXPECT_EQ(RoundToJsonLine(serial.rounds[i], false), RoundToJsonLine(parallel.rounds[i], false));
  }
}

TEST(FederationTest, DropoutRenormalizesOverSurvivors) {
  auto c = SmallConfig(Mode::kVanilla);
  c.forced_dropouts = {1};
  Federation fed(c);
  const auto before = fed.server().global();
  const auto rec = fed.RunRound(1);
  EXPECT_EQ(rec.selected, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(rec.survivors, (std::vector<int>{0, 2}));

  // Oracle: mean of the two survivors' local updates.
  std::vector<FactorList> updates;
  for (int id : {0, 2}) {
    auto opts = c.train;
    opts.seed = DeriveSeed(c.seed, Stream::kTrain, {1, static_cast<std::uint64_t>(id)});
    updates.push_back(lora::LocalTrain(fed.model(), before, fed.clients()[static_cast<std::size_t>(id)].data, opts)
                          .update.deltas);
  }
  auto expected = before;
  lora::ApplyUpdate(expected, AggregatePlain(updates), 1.0);
  EXPECT_LT(MaxAbsDiff(fed.server().global(), expected), 1e-15);
}

TEST(FederationTest, AllClientsDroppedKeepsGlobal) {
  auto c = SmallConfig(Mode::kVanilla);
  c.forced_dropouts = {0, 1, 2};
  Federation fed(c);
  const auto before = fed.server().global();
  const auto rec = fed.RunRound(1);
  EXPECT_TRUE(rec.survivors.empty());
  EXPECT_EQ(lora::Flatten(fed.server().global().Factors()), lora::Flatten(before.Factors()));
}

TEST(FederationTest, ServerLogNeverContainsClientPlaintext) {
  auto shielded = SmallConfig(Mode::kFedShield);
  auto control = shielded;
  control.mode = Mode::kVanilla;
  control.prune_enabled = PruneToggle::kOn;
  Federation a(shielded);
  Federation b(control);
  a.RunRound(1);
  b.RunRound(1);
  // The control's messages hold exactly the values the shielded clients sent
  // in round 1 (same seeds, same starting point).
  std::size_t probes = 0;
  for (const auto& wire : b.server().message_log()) {
    for (double v : DeserializeMessage(wire).values) {
      if (v == 0.0) continue;
      ++probes;
      const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
      EXPECT_NE(std::search(wire.begin(), wire.end(), p, p + 8), wire.end());
      for (const auto& sealed : a.server().message_log()) {
        ASSERT_EQ(std::search(sealed.begin(), sealed.end(), p, p + 8), sealed.end());
      }
    }
  }
  EXPECT_GT(probes, 10u);
}

TEST(FederationTest, CheckpointsAreWrittenPeriodically) {
  auto c = SmallConfig(Mode::kVanilla);
  c.rounds = 10;
  c.checkpoint_every = 5;
  c.checkpoint_dir = (std::filesystem::temp_directory_path() / "fedshield_fed_test_ckpt").string();
  std::filesystem::remove_all(c.checkpoint_dir);
  Federation fed(c);
  lora::AdapterSet at5;
  for (int t = 1; t <= 10; ++t) {
    fed.RunRound(t);
    if (t == 5) at5 = fed.server().global();
  }
  const auto loaded = lora::LoadCheckpoint(c.checkpoint_dir + "/ckpt_round_5");
  EXPECT_EQ(lora::Flatten(loaded.Factors()), lora::Flatten(at5.Factors()));
  EXPECT_TRUE(std::filesystem::exists(c.checkpoint_dir + "/ckpt_round_10"));
  EXPECT_FALSE(std::filesystem::exists(c.checkpoint_dir + "/ckpt_round_3"));
  std::filesystem::remove_all(c.checkpoint_dir);
}

TEST(FederationTest, DivergenceEndsRunWithPartialMetrics) {
  auto c = SmallConfig(Mode::kVanilla);
  c.rounds = 50;
  c.train.optimizer = lora::OptimizerKind::kSgd;
  c.train.lr = 50;
  c.train.divergence_threshold = 1e4;
  const auto metrics = RunTraining(c);
  EXPECT_TRUE(metrics.diverged);
  EXPECT_LT(metrics.rounds.size(), 50u);
  EXPECT_FALSE(metrics.error.empty());
}

TEST(FederationTest, DpModeAddsNoise) {
  auto dp = SmallConfig(Mode::kDpLora);
  dp.rounds = 1;
  auto vanilla = dp;
  vanilla.mode = Mode::kVanilla;
  const auto a = RunTraining(dp);
  const auto b = RunTraining(vanilla);
  EXPECT_GT(MaxAbsDiff(a.final_adapters, b.final_adapters), 0.01);
  EXPECT_EQ(a.rounds[0].p_t, 0.0);
}

TEST(FederationTest, DataSizeWeightingMatchesUniformForEqualShards) {
  auto c = SmallConfig(Mode::kVanilla);
  c.rounds = 2;
  const auto uniform = RunTraining(c);
  c.weighting = Weighting::kDataSize;
  const auto sized = RunTraining(c);
  EXPECT_EQ(lora::Flatten(uniform.final_adapters.Factors()), lora::Flatten(sized.final_adapters.Factors()));
}

TEST(FederationTest, RejectsInvalidConfig) {
  auto c = SmallConfig(Mode::kVanilla);
  c.clients_per_round = 4;
  EXPECT_THROW(Federation{c}, Error);
  c = SmallConfig(Mode::kVanilla);
  c.rounds = 0;
  EXPECT_THROW(Federation{c}, Error);
}

}  // namespace
}  // namespace fedshield::fed
