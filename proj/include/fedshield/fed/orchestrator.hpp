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


// Round state machine: select, sync, train locally, prune, privatize
// (encrypt / none / DP), aggregate, decrypt via the key authority, update.

#ifndef FEDSHIELD_FED_ORCHESTRATOR_HPP_
#define FEDSHIELD_FED_ORCHESTRATOR_HPP_

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fedshield/ckks/ckks.hpp"
#include "fedshield/common/parallel.hpp"
#include "fedshield/common/seed.hpp"
#include "fedshield/fed/aggregate.hpp"
#include "fedshield/fed/config.hpp"
#include "fedshield/fed/messages.hpp"
#include "fedshield/lora/checkpoint.hpp"
#include "fedshield/lora/dataset.hpp"
#include "fedshield/lora/model.hpp"
#include "fedshield/lora/train.hpp"
#include "fedshield/pruning/pruning.hpp"

namespace fedshield::fed {

/// Uniform sample of k of n client ids without replacement, sorted ascending.
/// Deterministic in (seed, round).
inline std::vector<int> SelectClients(int n, int k, int round, std::uint64_t seed) {
  Require(n >= 1 && k >= 1 && k <= n, ErrorCode::kParameter,
          "client selection needs 1 <= k <= N (k=" + std::to_string(k) + ", N=" + std::to_string(n) + ")");
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  std::mt19937_64 rng(DeriveSeed(seed, Stream::kSelect, {static_cast<std::uint64_t>(round)}));
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(pick(rng))]);
  }
  ids.resize(static_cast<std::size_t>(k));
  std::sort(ids.begin(), ids.end());
  return ids;
}

struct RoundTimings {
  double train = 0;  // summed over clients
  double encrypt = 0;
  double aggregate = 0;
  double decrypt = 0;
};

struct RoundRecord {
  int round = 0;
  double p_t = 0;
  Mode mode = Mode::kVanilla;
  std::vector<int> selected;
  std::vector<int> survivors;
  std::vector<double> client_losses;      // parallel to survivors
  std::vector<double> prune_error_norms;  // parallel to survivors
  double update_norm = 0;
  double global_loss = 0;    // validation loss after the update
  double grad_norm_sq = 0;   // squared adapter-gradient norm of the validation loss
  std::size_t upload_bytes = 0;
  RoundTimings timings;
};

struct RunMetrics {
  std::vector<RoundRecord> rounds;
  double initial_loss = 0;
  double initial_grad_norm_sq = 0;
  lora::AdapterSet final_adapters;
  bool diverged = false;
  std::string error;
};

struct ClientState {
  int id = 0;
  lora::ToyDataset data;
  lora::AdapterSet adapters;
};

/// Aggregator. Holds the plaintext global adapters, the public key and the
/// log of received messages; never a secret key or client data.
class ServerState {
 public:
  ServerState(lora::AdapterSet global, std::optional<ckks::PublicKey> pk)
      : global_(std::move(global)), pk_(std::move(pk)) {}

  const lora::AdapterSet& global() const { return global_; }
  const std::optional<ckks::PublicKey>& public_key() const { return pk_; }
  int round() const { return round_; }
  const std::vector<Bytes>& message_log() const { return log_; }

  UpdateMessage Receive(Bytes wire) {
    UpdateMessage m = DeserializeMessage(wire);
    log_.push_back(std::move(wire));
    return m;
  }

  void ApplyGlobalUpdate(const FactorList& mean) {
    lora::ApplyUpdate(global_, mean, 1.0);
    ++round_;
  }

  void SkipRound() { ++round_; }

 private:
  lora::AdapterSet global_;
  std::optional<ckks::PublicKey> pk_;
  int round_ = 0;
  std::vector<Bytes> log_;
};

namespace internal {

inline double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

struct ClientOutput {
  Bytes wire;
  double loss = 0;
  double prune_error = 0;
  double train_seconds = 0;
  double encrypt_seconds = 0;
};

}  // namespace internal

/// Base model, initial adapters, per-client shards and the validation set
/// for a run configuration. Every consumer (training, data export) derives
/// them from the same seeds.
struct TaskData {
  lora::Model model;
  lora::AdapterSet adapters;
  std::vector<lora::ToyDataset> shards;
  lora::ToyDataset validation;
};

inline TaskData BuildTaskData(const RunConfig& config) {
  TaskData d;
  auto [model, adapters] = lora::InitModel(config.model, DeriveSeed(config.seed, Stream::kModel));
  d.model = std::move(model);
  d.adapters = std::move(adapters);
  const lora::TaskGenerator gen(d.model, config.task, DeriveSeed(config.seed, Stream::kData, {0}));
  d.shards = lora::PartitionIid(gen, static_cast<std::size_t>(config.n_clients), config.samples_per_client,
                                DeriveSeed(config.seed, Stream::kData, {1}));
  d.validation = gen.Sample(config.validation_size, DeriveSeed(config.seed, Stream::kValidation));
  return d;
}

/// One simulated deployment: clients, server, and (fedshield mode) the key
/// authority. The frozen base model is distributed once at construction.
class Federation {
 public:
  explicit Federation(RunConfig config) : config_(std::move(config)) {
    ValidateConfig(config_);
    const std::uint64_t seed = config_.seed;
    TaskData data = BuildTaskData(config_);
    model_ = std::move(data.model);
    for (int c = 0; c < config_.n_clients; ++c) {
      clients_.push_back(ClientState{c, std::move(data.shards[static_cast<std::size_t>(c)]), data.adapters});
    }
    validation_ = std::move(data.validation);
    lora::AdapterSet adapters = std::move(data.adapters);
    std::optional<ckks::PublicKey> pk;
    if (config_.mode == Mode::kFedShield) {
      ctx_ = ckks::CkksContext::Create(config_.ckks);
      authority_ = std::make_shared<KeyAuthority>(ctx_, DeriveSeed(seed, Stream::kKeygen));
      encryptor_ = std::make_unique<ckks::Encryptor>(*ctx_, authority_->public_key());
      pk = authority_->public_key();
    }
    server_ = std::make_unique<ServerState>(std::move(adapters), std::move(pk));
  }

  const RunConfig& config() const { return config_; }
  const lora::Model& model() const { return model_; }
  const ServerState& server() const { return *server_; }
  const std::vector<ClientState>& clients() const { return clients_; }
  const lora::ToyDataset& validation() const { return validation_; }
  KeyAuthority* key_authority() { return authority_.get(); }
  std::size_t slot_count() const { return ctx_ ? ctx_->slot_count() : config_.ckks.poly_degree / 2; }

  double ValidationLoss() const { return lora::EvaluateLoss(model_, server_->global(), validation_); }

  double ValidationGradNormSq() const {
    const auto br = lora::Backward(model_, server_->global(), validation_.inputs, validation_.targets,
                                   lora::LossFor(validation_.task));
    return lora::SquaredNorm(br.gradients.grads);
  }

  bool Dropped(int client, int round) const {
    if (std::find(config_.forced_dropouts.begin(), config_.forced_dropouts.end(), client) !=
        config_.forced_dropouts.end()) {
      return true;
    }
    if (config_.dropout_prob <= 0) return false;
    std::mt19937_64 rng(DeriveSeed(config_.seed, Stream::kDropout,
                                   {static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(client)}));
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < config_.dropout_prob;
  }

  /// Executes round t (1-based). The global adapters advance exactly once.
  RoundRecord RunRound(int t) {
    RoundRecord rec;
    rec.round = t;
    rec.mode = config_.mode;
    rec.p_t = config_.PruningActive() ? pruning::ScheduleRate(config_.schedule, t) : 0.0;
    rec.selected = SelectClients(config_.n_clients, config_.clients_per_round, t, config_.seed);
    for (int c : rec.selected) {
      if (!Dropped(c, t)) rec.survivors.push_back(c);
    }

    std::vector<internal::ClientOutput> outputs(rec.survivors.size());
    ParallelFor(rec.survivors.size(), config_.threads, [&](std::size_t i) {
      outputs[i] = ClientStep(clients_[static_cast<std::size_t>(rec.survivors[i])], t, rec.p_t);
    });

    if (rec.survivors.empty()) {
      server_->SkipRound();
    } else {
      std::vector<UpdateMessage> messages;
      std::vector<double> sizes;
      for (auto& out : outputs) {
        rec.upload_bytes += out.wire.size();
        rec.client_losses.push_back(out.loss);
        rec.prune_error_norms.push_back(out.prune_error);
        rec.timings.train += out.train_seconds;
        rec.timings.encrypt += out.encrypt_seconds;
        messages.push_back(server_->Receive(std::move(out.wire)));
        sizes.push_back(config_.weighting == Weighting::kDataSize ? messages.back().samples : 1.0);
      }
      const auto weights = NormalizeWeights(sizes);
      FactorList mean;
      auto start = std::chrono::steady_clock::now();
      if (config_.mode == Mode::kFedShield) {
        const EncryptedAggregate agg =
            AggregateEncrypted(*ctx_, messages, weights, config_.averaging == Averaging::kAfterDecrypt);
        rec.timings.aggregate = internal::Seconds(start);
        start = std::chrono::steady_clock::now();
        mean = authority_->DecryptAggregate(agg);
        rec.timings.decrypt = internal::Seconds(start);
      } else {
        std::vector<FactorList> updates;
        for (const auto& m : messages) updates.push_back(lora::Unflatten(m.values, m.packing.shapes));
        mean = AggregatePlain(updates, weights);
        rec.timings.aggregate = internal::Seconds(start);
      }
      rec.update_norm = lora::L2Norm(mean);
      server_->ApplyGlobalUpdate(mean);
    }
    rec.global_loss = ValidationLoss();
    rec.grad_norm_sq = ValidationGradNormSq();
    if (!config_.checkpoint_dir.empty() && config_.checkpoint_every > 0 && t % config_.checkpoint_every == 0) {
      std::filesystem::create_directories(config_.checkpoint_dir);
      lora::SaveCheckpoint((std::filesystem::path(config_.checkpoint_dir) / ("ckpt_round_" + std::to_string(t))).string(),
                           server_->global());
    }
    return rec;
  }

  /// Runs all configured rounds. Divergence ends the run early with the
  /// rounds completed so far; `on_round` sees every completed record.
  RunMetrics Run(const std::function<void(const RoundRecord&)>& on_round = {}) {
    RunMetrics metrics;
    metrics.initial_loss = ValidationLoss();
    metrics.initial_grad_norm_sq = ValidationGradNormSq();
    try {
      for (int t = 1; t <= config_.rounds; ++t) {
        metrics.rounds.push_back(RunRound(t));
        if (on_round) on_round(metrics.rounds.back());
      }
    } catch (const DivergenceError& e) {
      metrics.diverged = true;
      metrics.error = e.what();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNumeric) throw;
      metrics.diverged = true;
      metrics.error = e.what();
    }
    metrics.final_adapters = server_->global();
    return metrics;
  }

 private:
  internal::ClientOutput ClientStep(ClientState& client, int t, double p_t) const {
    internal::ClientOutput out;
    const auto ut = static_cast<std::uint64_t>(t);
    const auto uc = static_cast<std::uint64_t>(client.id);
    client.adapters = server_->global();  // synchronize w_t
    lora::TrainOptions opts = config_.train;
    opts.seed = DeriveSeed(config_.seed, Stream::kTrain, {ut, uc});
    auto start = std::chrono::steady_clock::now();
    const auto trained = lora::LocalTrain(model_, client.adapters, client.data, opts);
    out.train_seconds = internal::Seconds(start);
    out.loss = trained.mean_loss;

    FactorList update = trained.update.deltas;
    if (config_.PruningActive()) {
      FactorList pruned = config_.granularity == pruning::Granularity::kPerFactor
                              ? pruning::ApplyMask(update, pruning::ComputeMask(update, p_t))
                              : pruning::PruneProductRefit(update, p_t);
      out.prune_error = pruning::PruningErrorNorm(update, pruned);
      update = std::move(pruned);
    }
    if (config_.mode == Mode::kDpLora) {
      update = DpPrivatize(update, config_.dp.clip, config_.dp.sigma, DeriveSeed(config_.seed, Stream::kDp, {ut, uc}));
    }
    const auto samples = static_cast<std::uint32_t>(client.data.size());
    start = std::chrono::steady_clock::now();
    const UpdateMessage msg =
        config_.mode == Mode::kFedShield
            ? MakeEncryptedMessage(*ctx_, *encryptor_, update, static_cast<std::uint32_t>(client.id),
                                   static_cast<std::uint32_t>(t), samples,
                                   DeriveSeed(config_.seed, Stream::kEncrypt, {ut, uc}))
            : MakePlaintextMessage(update, static_cast<std::uint32_t>(client.id), static_cast<std::uint32_t>(t),
                                   samples, slot_count());
    out.wire = SerializeMessage(msg);
    if (config_.mode == Mode::kFedShield) out.encrypt_seconds = internal::Seconds(start);
    return out;
  }

  RunConfig config_;
  lora::Model model_;
  std::vector<ClientState> clients_;
  lora::ToyDataset validation_;
  ckks::ContextPtr ctx_;
  std::shared_ptr<KeyAuthority> authority_;
  std::unique_ptr<ckks::Encryptor> encryptor_;
  std::unique_ptr<ServerState> server_;
};

inline RunMetrics RunTraining(const RunConfig& config, const std::function<void(const RoundRecord&)>& on_round = {}) {
  Federation fed(config);
  return fed.Run(on_round);
}

}  // namespace fedshield::fed

#endif  // FEDSHIELD_FED_ORCHESTRATOR_HPP_
