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


// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fedshield/attack/dlg.hpp"
#include "fedshield/ckks/ckks.hpp"
#include "fedshield/cli/app.hpp"
#include "fedshield/fed/fed.hpp"
#include "fedshield/lora/model.hpp"
#include "fedshield/pruning/pruning.hpp"
#include "gradient_check.hpp"
#include "mask_oracle.hpp"

namespace fedshield::acceptance {
namespace {

namespace fs = std::filesystem;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

// Planted linear regression: one identity layer, rank-2 adapter, plain SGD.
constexpr const char* kToyRegression = R"ini(
[run]
clients = 3
clients_per_round = 3
checkpoint_every = 0
[model]
layers = 16, 4
ranks = 2
alpha = 2
hidden_activation = identity
output_activation = identity
[data]
task = regression
planted_rank = 2
noise = 0.05
samples_per_client = 64
[train]
optimizer = sgd
lr = 0.3
epochs = 1
batch_size = 16
)ini";

cli::CliConfig ToyConfig(fed::Mode mode, int rounds, std::uint64_t seed) {
  cli::CliConfig c;
  cli::ApplyConfigText(c, kToyRegression, "toy-regression");
  c.run.mode = mode;
  c.run.rounds = rounds;
  c.run.seed = seed;
  return c;
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

fs::path ScratchDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fedshield_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int Cli(std::vector<std::string> args, std::string* out = nullptr) {
  std::ostringstream os, es;
  const int code = cli::Run(args, os, es);
  if (out) *out = os.str();
  return code;
}

// 1. CKKS roundtrip, addition and 1/k scaling.
Verdict CkksCorrectness() {
  const auto ctx = ckks::CkksContext::Create({8192, {60, 40, 60}, 0x1p40, 3.2});
  const auto [sk, pk] = ckks::KeyGen(*ctx, 101);
  const ckks::Encryptor enc(*ctx, pk);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const std::size_t slots = ctx->slot_count();
  auto random_vector = [&] {
    std::vector<double> v(slots);
    for (double& x : v) x = unit(rng);
    return v;
  };
  double roundtrip = 0, add = 0, scaled = 0;
  std::uint64_t seed = 1;
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_vector();
    const auto y = random_vector();
    const auto cx = enc.Encrypt(ckks::Encode(*ctx, x, ctx->params().scale), seed++);
    const auto cy = enc.Encrypt(ckks::Encode(*ctx, y, ctx->params().scale), seed++);
    const auto dx = ckks::Decode(*ctx, ckks::Decrypt(*ctx, cx, sk));
    const auto sum = ckks::Decode(*ctx, ckks::Decrypt(*ctx, ckks::Add(*ctx, cx, cy), sk));
    const int k = 1 + static_cast<int>(rng() % 10);
    const auto part = ckks::Decode(*ctx, ckks::Decrypt(*ctx, ckks::MulPlainScalar(*ctx, cx, 1.0 / k), sk));
    for (std::size_t i = 0; i < slots; ++i) {
      roundtrip = std::max(roundtrip, std::abs(dx[i] - x[i]));
      add = std::max(add, std::abs(sum[i] - (x[i] + y[i])));
      scaled = std::max(scaled, std::abs(part[i] - x[i] / k));
    }
  }
  const double worst = std::max({roundtrip, add, scaled});
  return {worst < 1e-3, Fmt("max abs error roundtrip %.3g, add %.3g, 1/k %.3g (limit 1e-3)", roundtrip, add, scaled)};
}

// 2. Encrypted aggregation tracks the pruned plaintext control.
Verdict EncryptedMatchesPlaintext() {
  const auto config = ToyConfig(fed::Mode::kFedShield, 50, 1);
  const auto report = cli::RunVerify(config);
  return {report.pass && report.deviations.size() == 50,
          Fmt("50 rounds, N=%zu, max per-round deviation %.3g (limit 1e-3)", config.run.ckks.poly_degree,
              report.max_deviation)};
}

// 3. Pruning schedule values.
Verdict ScheduleValues() {
  const pruning::PruneSchedule s{0.2, 0.5, 0, 200};
  const bool pass = pruning::ScheduleRate(s, 0) == 0.2 && pruning::ScheduleRate(s, 100) == 0.35 &&
                    pruning::ScheduleRate(s, 200) == 0.5 && pruning::ScheduleRate(s, 250) == 0.5 &&
                    pruning::ScheduleRate(s, 1000) == 0.5;
  return {pass, Fmt("p(0)=%.17g p(100)=%.17g p(200)=%.17g", pruning::ScheduleRate(s, 0),
                    pruning::ScheduleRate(s, 100), pruning::ScheduleRate(s, 200))};
}

// 4. L1 mask equals the exhaustive minimal-error mask.
Verdict MaskOptimality() {
  std::mt19937_64 rng(2024);
  int mismatches = 0;
  for (int draw = 0; draw < 1000; ++draw) {
    const auto d = testing_support::RandomSmallTensor(rng);
    lora::Matrix a(1, static_cast<Eigen::Index>(d.values.size()));
    for (std::size_t i = 0; i < d.values.size(); ++i) a(0, static_cast<Eigen::Index>(i)) = d.values[i];
    const auto mask = pruning::ComputeMask(lora::FactorList{{a, lora::Matrix::Zero(1, 1)}}, d.rate);
    if (mask.keep[0] != testing_support::ExhaustiveL2Mask(d.values, d.rate)) ++mismatches;
  }
  return {mismatches == 0, Fmt("%d mismatches over 1000 draws", mismatches)};
}

// 5. Analytic adapter gradients against central differences.
Verdict GradientCorrectness() {
  std::mt19937_64 rng(55);
  const lora::Activation acts[] = {lora::Activation::kIdentity, lora::Activation::kTanh, lora::Activation::kRelu};
  double worst = 0;
  for (int net = 0; net < 50; ++net) {
    lora::ModelSpec spec;
    const int layers = 1 + static_cast<int>(rng() % 3);
    spec.layer_sizes.clear();
    spec.ranks.clear();
    for (int l = 0; l <= layers; ++l) spec.layer_sizes.push_back(2 + static_cast<int>(rng() % 5));
    const bool classify = net % 2 == 1;
    if (classify) spec.layer_sizes.back() = std::max(spec.layer_sizes.back(), 2);
    for (int l = 0; l < layers; ++l) spec.ranks.push_back(1 + static_cast<int>(rng() % 2));
    spec.alpha = 1.0 + static_cast<double>(rng() % 8);
    spec.hidden_activation = acts[rng() % 3];
    auto [model, adapters] = lora::InitModel(spec, rng());
    std::normal_distribution<double> normal;
    for (auto& ad : adapters.adapters) {
      for (Eigen::Index i = 0; i < ad.b.size(); ++i) ad.b.data()[i] = normal(rng);
    }
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng() % 5);
    lora::Matrix x(n, spec.layer_sizes.front());
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    lora::Matrix t = lora::Matrix::Zero(n, spec.layer_sizes.back());
    for (Eigen::Index i = 0; i < n; ++i) {
      if (classify) {
        t(i, static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(t.cols()))) = 1.0;
      } else {
        for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = normal(rng);
      }
    }
    const auto report = lora::testing_support::CheckGradients(
        model, adapters, x, t, classify ? lora::LossKind::kCrossEntropy : lora::LossKind::kMse);
    worst = std::max(worst, report.max_relative_error);
  }
  return {worst < 1e-4, Fmt("50 networks, max relative error %.3g (limit 1e-4)", worst)};
}

// 6. Vanilla training on the planted regression task converges.
Verdict Convergence() {
  const auto config = ToyConfig(fed::Mode::kVanilla, 200, 1);
  const auto metrics = fed::RunTraining(config.run);
  if (metrics.diverged || metrics.rounds.size() != 200) return {false, "run did not complete: " + metrics.error};
  double running = metrics.initial_grad_norm_sq;
  double at50 = 0;
  for (const auto& r : metrics.rounds) {
    running = std::min(running, r.grad_norm_sq);
    if (r.round == 50) at50 = running;
  }
  const double ratio = metrics.rounds.back().global_loss / metrics.initial_loss;
  const bool pass = ratio < 0.01 && running <= at50 * 2.0 / 3.0;
  return {pass, Fmt("final/initial loss %.3g (limit 0.01); min grad-norm^2 R=50 %.3g, R=200 %.3g (ratio %.3g, limit 2/3)",
                    ratio, at50, running, running / at50)};
}

// 7. Pruned encrypted training keeps vanilla utility.
Verdict UtilityUnderPruning() {
  std::vector<double> ratios;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto shielded = ToyConfig(fed::Mode::kFedShield, 200, seed);
    shielded.run.schedule = {0.2, 0.5, 0, 200};
    const auto a = fed::RunTraining(shielded.run);
    const auto b = fed::RunTraining(ToyConfig(fed::Mode::kVanilla, 200, seed).run);
    if (a.diverged || b.diverged) return {false, Fmt("seed %d diverged", static_cast<int>(seed))};
    ratios.push_back(a.rounds.back().global_loss / b.rounds.back().global_loss);
    per_seed += Fmt(" %.3f", ratios.back());
  }
  const double median = Median(ratios);
  return {std::abs(median - 1.0) <= 0.10,
          Fmt("median fedshield/vanilla final loss %.4f (limit 1 +- 0.10); per seed:", median) + per_seed};
}

// 8. Pruning mitigates gradient inversion; the attack works without it.
Verdict AttackMitigation() {
  attack::AttackConfig cfg;
  cfg.trials = 20;
  cfg.rates = {0.0, 0.7};
  cfg.threads = 4;
  const auto results = attack::SweepPruneRates(cfg);
  const double m0 = attack::MedianMse(results[0]);
  const double m7 = attack::MedianMse(results[1]);
  const double success = attack::SuccessRate(results[0], 1e-3);
  const auto sign = attack::PairedSignTest(results[0], results[1]);
  const bool pass = m7 > m0 && sign.p_value < 0.05 && success >= 0.8;
  return {pass, Fmt("median mse p=0 %.3g, p=0.7 %.3g; sign test %d/%d p=%.3g (alpha 0.05); success at p=0 %.2f "
                    "(floor 0.80)",
                    m0, m7, sign.wins, sign.wins + sign.losses, sign.p_value, success)};
}

// 9. Ciphertext count reported by bench-fhe.
Verdict PackingCount() {
  const auto dir = ScratchDir("bench");
  std::string out;
  const int code = Cli({"bench-fhe", "--ckks.poly_degree", "16384", "--ckks.modulus_bits", "60,40,40,40,60",
                        "--bench.vector_len", "30000000", "--bench.max_ciphertexts", "1", "--out", dir.string()},
                       &out);
  const auto pos = out.find("n_c = ");
  const std::string reported = pos == std::string::npos ? "" : out.substr(pos + 6, out.find('\n', pos) - pos - 6);
  return {code == 0 && reported == "3663", "bench-fhe at N=16384 reports n_c = " + reported + " (expected 3663)"};
}

// 10. Identical configurations give byte-identical metrics files.
Verdict Determinism() {
  std::string detail;
  bool pass = true;
  for (const std::string mode : {"vanilla", "fedshield"}) {
    const auto dir = ScratchDir("determinism_" + mode);
    const auto ini = dir / "run.ini";
    std::ofstream(ini) << kToyRegression;
    std::vector<std::string> contents;
    for (const std::string run : {"a", "b"}) {
      const int code = Cli({"train", "--config", ini.string(), "--mode", mode, "--rounds", "20", "--out",
                            (dir / run).string()});
      pass = pass && code == 0;
      contents.push_back(ReadFile(dir / run / "metrics.jsonl"));
    }
    const bool same = !contents[0].empty() && contents[0] == contents[1];
    pass = pass && same;
    detail += mode + (same ? " identical" : " DIFFERENT") + Fmt(" (%zu bytes); ", contents[0].size());
  }
  return {pass, detail};
}

}  // namespace
}  // namespace fedshield::acceptance

int main() {
  using namespace fedshield::acceptance;  // NOLINT
  setenv("FEDSHIELD_LOG", "error", 0);
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"ckks correctness", CkksCorrectness},
      {"encrypted aggregation equals plaintext", EncryptedMatchesPlaintext},
      {"pruning schedule", ScheduleValues},
      {"mask optimality", MaskOptimality},
      {"gradient correctness", GradientCorrectness},
      {"convergence", Convergence},
      {"utility under pruning", UtilityUnderPruning},
      {"attack mitigation", AttackMitigation},
      {"packing arithmetic", PackingCount},
      {"determinism", Determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %zu %s: %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                v.detail.c_str(), secs);
    std::fflush(stdout);
    if (!v.pass) ++failures;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
