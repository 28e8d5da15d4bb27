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


// The five command verbs. Each returns a process exit status (0 success,
// 1 runtime failure or a FAIL verdict) and writes its artifacts under `out`.
// Configurations are validated by the caller.

#ifndef FEDSHIELD_CLI_COMMANDS_HPP_
#define FEDSHIELD_CLI_COMMANDS_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "fedshield/attack/dlg.hpp"
#include "fedshield/ckks/ckks.hpp"
#include "fedshield/cli/config.hpp"
#include "fedshield/fed/fed.hpp"
#include "spdlog/spdlog.h"

namespace fedshield::cli {

namespace fs = std::filesystem;

inline std::ofstream OpenOutput(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(out.good(), ErrorCode::kIo, "cannot write '" + path.string() + "'");
  return out;
}

// ---------------------------------------------------------------- train

/// Writes metrics.jsonl (header line, then one record per round, flushed as
/// rounds complete), client_loss.csv and periodic checkpoints.
inline int CmdTrain(CliConfig config, const fs::path& out, std::ostream& os) {
  if (config.run.checkpoint_every > 0) config.run.checkpoint_dir = (out / "checkpoints").string();
  std::ofstream metrics = OpenOutput(out / "metrics.jsonl");
  std::ofstream losses = OpenOutput(out / "client_loss.csv");
  metrics << HeaderLine(config) << std::flush;
  losses << "round,client,loss\n";
  losses.precision(17);

  spdlog::info("train: mode={} clients={} rounds={} seed={}", fed::ModeName(config.run.mode), config.run.n_clients,
               config.run.rounds, config.run.seed);
  fed::RunMetrics result;
  try {
    result = fed::RunTraining(config.run, [&](const fed::RoundRecord& r) {
      metrics << fed::RoundToJsonLine(r, config.include_timings) << std::flush;
      for (std::size_t i = 0; i < r.survivors.size(); ++i) {
        losses << r.round << ',' << r.survivors[i] << ',' << r.client_losses[i] << '\n';
      }
      losses.flush();
      spdlog::info("round {}: p_t={} survivors={} global_loss={:.6g}", r.round, r.p_t, r.survivors.size(),
                   r.global_loss);
    });
  } catch (const std::exception& e) {
    spdlog::error("train failed: {}", e.what());
    os << "train: error: " << e.what() << "\n";
    return 1;
  }
  if (result.diverged) {
    spdlog::error("train diverged: {}", result.error);
    os << "train: diverged after " << result.rounds.size() << " rounds: " << result.error << "\n";
    return 1;
  }
  const double final_loss = result.rounds.empty() ? result.initial_loss : result.rounds.back().global_loss;
  os << "train: " << result.rounds.size() << " rounds, initial loss " << internal::FormatDouble(result.initial_loss)
     << ", final loss " << internal::FormatDouble(final_loss) << "\n";
  return 0;
}

// ---------------------------------------------------------------- verify

struct VerifyReport {
  std::vector<double> deviations;  // per round, max |entry difference|
  double max_deviation = 0;
  bool pass = false;
  std::string note;  // why the comparison stopped early, if it did
};

inline constexpr double kVerifyTolerance = 1e-3;

/// Runs the encrypted pipeline and a plaintext control that applies the
/// same pruning, in lock step, and compares the global adapters each round.
inline VerifyReport RunVerify(const CliConfig& config) {
  fed::RunConfig shielded = config.run;
  shielded.mode = fed::Mode::kFedShield;
  shielded.checkpoint_dir.clear();
  fed::RunConfig control = shielded;
  control.mode = fed::Mode::kVanilla;
  control.prune_enabled = shielded.PruningActive() ? fed::PruneToggle::kOn : fed::PruneToggle::kOff;

  fed::Federation a(shielded);
  fed::Federation b(control);
  a.key_authority()->set_decode_scale_factor(config.decode_scale_factor);
  VerifyReport report;
  for (int t = 1; t <= shielded.rounds; ++t) {
    try {
      a.RunRound(t);
      b.RunRound(t);
    } catch (const DivergenceError& e) {
      report.deviations.push_back(INFINITY);
      report.max_deviation = INFINITY;
      report.note = "round " + std::to_string(t) + ": " + e.what();
      break;
    }
    const auto x = lora::Flatten(a.server().global().Factors());
    const auto y = lora::Flatten(b.server().global().Factors());
    double dev = 0;
    for (std::size_t i = 0; i < x.size(); ++i) dev = std::max(dev, std::abs(x[i] - y[i]));
    if (!std::isfinite(dev)) dev = INFINITY;
    report.deviations.push_back(dev);
    report.max_deviation = std::max(report.max_deviation, dev);
  }
  report.pass = report.max_deviation < kVerifyTolerance;
  return report;
}

inline int CmdVerify(const CliConfig& config, const fs::path& out, std::ostream& os) {
  VerifyReport report;
  try {
    report = RunVerify(config);
  } catch (const std::exception& e) {
    os << "verify: error: " << e.what() << "\n";
    return 1;
  }
  std::ofstream csv = OpenOutput(out / "verify.csv");
  csv << "round,max_deviation\n";
  csv.precision(17);
  for (std::size_t i = 0; i < report.deviations.size(); ++i) {
    csv << i + 1 << ',' << report.deviations[i] << '\n';
    os << "round " << i + 1 << ": max deviation " << internal::FormatDouble(report.deviations[i]) << "\n";
  }
  if (report.pass) {
    os << "PASS verify: max deviation " << internal::FormatDouble(report.max_deviation) << " < " << kVerifyTolerance
       << "\n";
    return 0;
  }
  os << "FAIL verify: max deviation " << internal::FormatDouble(report.max_deviation) << " >= " << kVerifyTolerance
     << "; the decrypted aggregate does not match the plaintext control";
  if (!report.note.empty()) os << "; training stopped at " << report.note;
  if (config.decode_scale_factor != 1.0) {
    os << " (decoder scale is off by a factor of " << internal::FormatDouble(config.decode_scale_factor) << ")";
  }
  os << "\n";
  return 1;
}

// ---------------------------------------------------------------- bench-fhe

struct BenchReport {
  std::size_t poly_degree = 0;
  std::size_t slots = 0;
  std::uint64_t vector_len = 0;
  int clients = 0;
  std::uint64_t ciphertexts = 0;           // n_c per client
  std::uint64_t measured_ciphertexts = 0;  // actually timed
  double encrypt_seconds = 0;    // encode + encrypt, one client, extrapolated to n_c
  double aggregate_seconds = 0;  // sum over clients and 1/k scaling, extrapolated
  double decrypt_seconds = 0;    // decrypt + decode of the aggregate, extrapolated
};

inline BenchReport RunBench(const CliConfig& config) {
  const auto& params = config.run.ckks;
  BenchReport r;
  r.poly_degree = params.poly_degree;
  r.slots = params.poly_degree / 2;
  r.vector_len = config.bench.vector_len;
  r.clients = config.bench.clients;
  r.ciphertexts = fed::PackingDescriptor::CiphertextCount(r.vector_len, r.slots);
  r.measured_ciphertexts = std::min(r.ciphertexts, config.bench.max_ciphertexts);
  if (r.measured_ciphertexts == 0) return r;

  const auto ctx = ckks::CkksContext::Create(params);
  const auto [sk, pk] = ckks::KeyGen(*ctx, DeriveSeed(config.run.seed, Stream::kKeygen));
  const ckks::Encryptor enc(*ctx, pk);
  std::mt19937_64 rng(config.run.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> values(r.slots);

  using Clock = std::chrono::steady_clock;
  const auto m = static_cast<std::size_t>(r.measured_ciphertexts);
  std::vector<std::vector<ckks::Ciphertext>> cts(static_cast<std::size_t>(r.clients));
  auto start = Clock::now();
  for (int c = 0; c < r.clients; ++c) {
    for (std::size_t j = 0; j < m; ++j) {
      for (double& v : values) v = unit(rng);
      const auto pt = ckks::Encode(*ctx, values, params.scale);
      cts[static_cast<std::size_t>(c)].push_back(
          enc.Encrypt(pt, DeriveSeed(config.run.seed, Stream::kEncrypt, {static_cast<std::uint64_t>(c), j})));
    }
  }
  const double encrypt_all = std::chrono::duration<double>(Clock::now() - start).count();

  start = Clock::now();
  std::vector<ckks::Ciphertext> sums;
  for (std::size_t j = 0; j < m; ++j) {
    ckks::Ciphertext acc = cts[0][j];
    for (std::size_t c = 1; c < cts.size(); ++c) acc = ckks::Add(*ctx, acc, cts[c][j]);
    sums.push_back(ckks::MulPlainScalar(*ctx, acc, 1.0 / r.clients));
  }
  const double aggregate = std::chrono::duration<double>(Clock::now() - start).count();

  start = Clock::now();
  for (const auto& ct : sums) {
    const auto decoded = ckks::Decode(*ctx, ckks::Decrypt(*ctx, ct, sk));
    (void)decoded;
  }
  const double decrypt = std::chrono::duration<double>(Clock::now() - start).count();

  const double scale = static_cast<double>(r.ciphertexts) / static_cast<double>(m);
  r.encrypt_seconds = encrypt_all / r.clients * scale;
  r.aggregate_seconds = aggregate * scale;
  r.decrypt_seconds = decrypt * scale;
  return r;
}

inline int CmdBenchFhe(const CliConfig& config, const fs::path& out, std::ostream& os) {
  BenchReport r;
  try {
    r = RunBench(config);
  } catch (const std::exception& e) {
    os << "bench-fhe: error: " << e.what() << "\n";
    return 1;
  }
  std::ofstream csv = OpenOutput(out / "bench_fhe.csv");
  csv << "poly_degree,slots,vector_len,clients,n_c,measured_ciphertexts,encrypt_s_per_client,aggregate_s,decrypt_s\n";
  csv.precision(17);
  csv << r.poly_degree << ',' << r.slots << ',' << r.vector_len << ',' << r.clients << ',' << r.ciphertexts << ','
      << r.measured_ciphertexts << ',' << r.encrypt_seconds << ',' << r.aggregate_seconds << ',' << r.decrypt_seconds
      << '\n';
  os << "N = " << r.poly_degree << ", slots = " << r.slots << ", vector_len = " << r.vector_len << "\n";
  os << "n_c = " << r.ciphertexts << "\n";
  if (r.measured_ciphertexts > 0) {
    os << "timed " << r.measured_ciphertexts << " ciphertexts per client, extrapolated to n_c:\n";
    os << "  encode+encrypt per client: " << r.encrypt_seconds << " s\n";
    os << "  aggregate over " << r.clients << " clients: " << r.aggregate_seconds << " s\n";
    os << "  decrypt+decode: " << r.decrypt_seconds << " s\n";
  }
  return 0;
}

// ---------------------------------------------------------------- attack

inline int CmdAttack(const CliConfig& config, const fs::path& out, std::ostream& os) {
  std::vector<attack::ReconstructionResult> results;
  try {
    results = attack::SweepPruneRates(config.attack);
  } catch (const std::exception& e) {
    os << "attack: error: " << e.what() << "\n";
    return 1;
  }
  std::ofstream trials = OpenOutput(out / "attack_trials.csv");
  attack::WriteTrialsCsv(trials, results);
  std::ofstream summary = OpenOutput(out / "attack_summary.csv");
  attack::WriteSummaryCsv(summary, results);

  for (const auto& r : results) {
    os << "rate " << r.rate << ": median mse " << attack::MedianMse(r) << ", success "
       << attack::SuccessRate(r, 1e-3) << ", failures " << r.failures() << "\n";
  }
  if (results.size() >= 2) {
    for (std::size_t i = 1; i < results.size(); ++i) {
      const auto t = attack::PairedSignTest(results[0], results[i]);
      os << "sign test rate " << results[0].rate << " vs " << results[i].rate << ": " << t.wins << " larger, "
         << t.losses << " smaller, " << t.ties << " ties, p = " << t.p_value << "\n";
    }
    os << "medians non-decreasing in rate: " << (attack::MediansNonDecreasing(results) ? "yes" : "no") << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- gen-data

/// Writes client_{i}.csv with exactly the shards a training run with the
/// same configuration would use.
inline int CmdGenData(const CliConfig& config, const fs::path& out, std::ostream& os) {
  try {
    const fed::TaskData data = fed::BuildTaskData(config.run);
    fs::create_directories(out);
    for (std::size_t i = 0; i < data.shards.size(); ++i) {
      lora::WriteDatasetCsv(data.shards[i], (out / ("client_" + std::to_string(i) + ".csv")).string());
    }
    os << "gen-data: wrote " << data.shards.size() << " files of " << config.run.samples_per_client
       << " samples to " << out.string() << "\n";
  } catch (const std::exception& e) {
    os << "gen-data: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace fedshield::cli

#endif  // FEDSHIELD_CLI_COMMANDS_HPP_
