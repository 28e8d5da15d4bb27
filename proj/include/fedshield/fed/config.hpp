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


// Run configuration for the federated simulation.

#ifndef FEDSHIELD_FED_CONFIG_HPP_
#define FEDSHIELD_FED_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fedshield/ckks/context.hpp"
#include "fedshield/common/error.hpp"
#include "fedshield/lora/dataset.hpp"
#include "fedshield/lora/model.hpp"
#include "fedshield/lora/train.hpp"
#include "fedshield/pruning/pruning.hpp"

namespace fedshield::fed {

enum class Mode { kFedShield, kVanilla, kDpLora };

inline std::string_view ModeName(Mode m) {
  switch (m) {
    case Mode::kFedShield: return "fedshield";
    case Mode::kVanilla: return "vanilla";
    case Mode::kDpLora: return "dp_lora";
  }
  return "unknown";
}

inline Mode ParseMode(std::string_view s) {
  if (s == "fedshield") return Mode::kFedShield;
  if (s == "vanilla") return Mode::kVanilla;
  if (s == "dp_lora") return Mode::kDpLora;
  Fail(ErrorCode::kParameter, "unknown mode '" + std::string(s) + "'");
}

enum class KeyPlacement { kSeparate, kColocatedServer };

inline std::string_view KeyPlacementName(KeyPlacement k) {
  return k == KeyPlacement::kSeparate ? "separate" : "colocated_server";
}

inline KeyPlacement ParseKeyPlacement(std::string_view s) {
  if (s == "separate") return KeyPlacement::kSeparate;
  if (s == "colocated_server") return KeyPlacement::kColocatedServer;
  Fail(ErrorCode::kParameter, "unknown key authority placement '" + std::string(s) + "'");
}

// Pruning switch; kAuto prunes in fedshield mode only.
enum class PruneToggle { kAuto, kOn, kOff };

inline std::string_view PruneToggleName(PruneToggle p) {
  switch (p) {
    case PruneToggle::kAuto: return "auto";
    case PruneToggle::kOn: return "true";
    case PruneToggle::kOff: return "false";
  }
  return "unknown";
}

inline PruneToggle ParsePruneToggle(std::string_view s) {
  if (s == "auto") return PruneToggle::kAuto;
  if (s == "true" || s == "on" || s == "1") return PruneToggle::kOn;
  if (s == "false" || s == "off" || s == "0") return PruneToggle::kOff;
  Fail(ErrorCode::kParameter, "prune.enabled must be auto, true or false");
}

enum class Weighting { kUniform, kDataSize };

inline std::string_view WeightingName(Weighting w) { return w == Weighting::kUniform ? "uniform" : "data_size"; }

inline Weighting ParseWeighting(std::string_view s) {
  if (s == "uniform") return Weighting::kUniform;
  if (s == "data_size") return Weighting::kDataSize;
  Fail(ErrorCode::kParameter, "unknown weighting '" + std::string(s) + "'");
}

// Where the 1/|n_t| factor is applied in fedshield mode.
enum class Averaging { kEncrypted, kAfterDecrypt };

inline std::string_view AveragingName(Averaging a) {
  return a == Averaging::kEncrypted ? "encrypted" : "after_decrypt";
}

inline Averaging ParseAveraging(std::string_view s) {
  if (s == "encrypted") return Averaging::kEncrypted;
  if (s == "after_decrypt") return Averaging::kAfterDecrypt;
  Fail(ErrorCode::kParameter, "unknown averaging '" + std::string(s) + "'");
}

struct DpParams {
  double clip = 1.0;
  double sigma = 0.5;
};

struct RunConfig {
  int n_clients = 3;
  int clients_per_round = 3;
  int rounds = 10;
  Mode mode = Mode::kFedShield;
  std::uint64_t seed = 1;
  int threads = 1;

  PruneToggle prune_enabled = PruneToggle::kAuto;
  pruning::PruneSchedule schedule;
  pruning::Granularity granularity = pruning::Granularity::kPerFactor;

  ckks::CkksParams ckks;
  KeyPlacement key_authority = KeyPlacement::kSeparate;
  Averaging averaging = Averaging::kEncrypted;
  Weighting weighting = Weighting::kUniform;
  DpParams dp;

  lora::ModelSpec model;
  lora::TaskSpec task;
  std::size_t samples_per_client = 64;
  std::size_t validation_size = 256;

  lora::TrainOptions train;  // seed is derived per client and round

  double dropout_prob = 0.0;
  std::vector<int> forced_dropouts;  // client ids that fail every round

  int checkpoint_every = 10;
  std::string checkpoint_dir;  // empty disables checkpoints

  bool PruningActive() const {
    if (prune_enabled == PruneToggle::kAuto) return mode == Mode::kFedShield;
    return prune_enabled == PruneToggle::kOn;
  }
};

inline void ValidateConfig(const RunConfig& c) {
  Require(c.n_clients >= 1, ErrorCode::kParameter, "run.clients must be >= 1");
  Require(c.clients_per_round >= 1 && c.clients_per_round <= c.n_clients, ErrorCode::kParameter,
          "run.clients_per_round must be in [1, run.clients]");
  Require(c.rounds >= 1, ErrorCode::kParameter, "run.rounds must be >= 1");
  Require(c.threads >= 1, ErrorCode::kParameter, "run.threads must be >= 1");
  Require(c.samples_per_client >= 1, ErrorCode::kParameter, "data.samples_per_client must be >= 1");
  Require(c.validation_size >= 1, ErrorCode::kParameter, "data.validation_size must be >= 1");
  Require(c.dropout_prob >= 0 && c.dropout_prob < 1, ErrorCode::kParameter, "run.dropout_prob must be in [0, 1)");
  Require(c.checkpoint_every >= 0, ErrorCode::kParameter, "run.checkpoint_every must be >= 0");
  Require(c.dp.clip > 0 && c.dp.sigma >= 0, ErrorCode::kParameter, "dp.clip must be > 0 and dp.sigma >= 0");
  if (c.PruningActive()) {
    pruning::ValidateSchedule(c.schedule);
    Require(c.schedule.p_target < 1, ErrorCode::kParameter, "prune.p_target must be < 1");
  }
  if (c.mode == Mode::kFedShield) ckks::ValidateParams(c.ckks);
}

}  // namespace fedshield::fed

#endif  // FEDSHIELD_FED_CONFIG_HPP_
