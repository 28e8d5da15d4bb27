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


// Argument handling for the `fedshield` executable.
//
//   fedshield <train|verify|bench-fhe|attack|gen-data> [--config PATH]
//       [--mode M] [--rounds R] [--clients N] [--clients-per-round K]
//       [--seed S] [--out DIR] [--section.key VALUE | --section.key=VALUE]...
//
// Settings apply in order: config file, named flags, dotted overrides.
// Exit status: 0 success, 1 runtime failure or FAIL verdict, 2 usage or
// configuration error.

#ifndef FEDSHIELD_CLI_APP_HPP_
#define FEDSHIELD_CLI_APP_HPP_

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedshield/cli/commands.hpp"
#include "fedshield/cli/config.hpp"
#include "spdlog/sinks/stdout_color_sinks.h"
#include "spdlog/spdlog.h"

namespace fedshield::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// FEDSHIELD_LOG = error | info | debug (default info). Logs go to stderr.
inline void InitLogging() {
  static const bool done = [] {
    auto logger = spdlog::stderr_color_mt("fedshield");
    spdlog::set_default_logger(logger);
    spdlog::level::level_enum level = spdlog::level::info;
    if (const char* env = std::getenv("FEDSHIELD_LOG")) {
      const std::string v = env;
      if (v == "error") {
        level = spdlog::level::err;
      } else if (v == "debug") {
        level = spdlog::level::debug;
      } else if (v != "info") {
        spdlog::warn("ignoring FEDSHIELD_LOG='{}'; expected error, info or debug", v);
      }
    }
    spdlog::set_level(level);
    return true;
  }();
  (void)done;
}

/// Parses unrecognized `--a.b v` / `--a.b=v` tokens into key/value pairs.
inline std::vector<std::pair<std::string, std::string>> ParseDottedOverrides(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    Require(tok.rfind("--", 0) == 0 && tok.find('.') != std::string::npos, ErrorCode::kConfig,
            "unexpected argument '" + tok + "'");
    const std::string body = tok.substr(2);
    if (const auto eq = body.find('='); eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      continue;
    }
    Require(i + 1 < extras.size(), ErrorCode::kConfig, "missing value for '" + tok + "'");
    out.emplace_back(body, extras[++i]);
  }
  return out;
}

/// Entry point. `args` excludes the program name.
inline int Run(const std::vector<std::string>& args, std::ostream& os, std::ostream& es) {
  InitLogging();
  CLI::App app{"FedShield: federated LoRA with pruning and CKKS secure aggregation", "fedshield"};
  app.require_subcommand(1, 1);

  struct Flags {
    std::string config;
    std::string out = "out";
    std::optional<std::string> mode;
    std::optional<int> rounds;
    std::optional<int> clients;
    std::optional<int> clients_per_round;
    std::optional<std::uint64_t> seed;
  } flags;

  const std::vector<std::pair<std::string, std::string>> verbs = {
      {"train", "run federated training and write metrics"},
      {"verify", "compare encrypted and plaintext aggregation round by round"},
      {"bench-fhe", "time CKKS encryption, aggregation and decryption"},
      {"attack", "gradient inversion sweep over pruning rates"},
      {"gen-data", "write per-client dataset files"}};
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : verbs) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->allow_extras();
    sub->add_option("--config", flags.config, "INI config file or metrics header");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--mode", flags.mode, "fedshield | vanilla | dp_lora");
    sub->add_option("--rounds", flags.rounds, "communication rounds");
    sub->add_option("--clients", flags.clients, "number of clients");
    sub->add_option("--clients-per-round", flags.clients_per_round, "clients selected per round");
    sub->add_option("--seed", flags.seed, "master seed");
    subs.push_back(sub);
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    os << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    os << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    es << "fedshield: " << e.what() << "\n" << "run 'fedshield --help' for usage\n";
    return kExitUsage;
  }
  const auto it = std::find_if(subs.begin(), subs.end(), [](CLI::App* s) { return s->parsed(); });
  CLI::App* sub = *it;
  const std::string verb = sub->get_name();

  CliConfig config;
  try {
    if (!flags.config.empty()) LoadConfigFile(config, flags.config);
    if (flags.mode) SetKey(config, "run.mode", *flags.mode);
    if (flags.rounds) config.run.rounds = *flags.rounds;
    if (flags.clients) config.run.n_clients = *flags.clients;
    if (flags.clients_per_round) config.run.clients_per_round = *flags.clients_per_round;
    if (flags.seed) config.run.seed = *flags.seed;
    for (const auto& [key, value] : ParseDottedOverrides(sub->remaining())) SetKey(config, key, value);
    if (verb == "attack") {
      attack::ValidateAttackConfig(config.attack);
    } else if (verb == "bench-fhe") {
      ckks::ValidateParams(config.run.ckks);
      Require(config.bench.clients >= 1, ErrorCode::kConfig, "bench.clients must be >= 1");
      Require(config.bench.max_ciphertexts >= 1, ErrorCode::kConfig, "bench.max_ciphertexts must be >= 1");
    } else {
      fed::RunConfig check = config.run;
      if (verb == "verify") check.mode = fed::Mode::kFedShield;
      fed::ValidateConfig(check);
      if (verb == "verify") {
        Require(config.decode_scale_factor > 0, ErrorCode::kConfig, "verify.decode_scale_factor must be > 0");
      }
    }
  } catch (const Error& e) {
    es << "fedshield " << verb << ": " << e.what() << "\n";
    return kExitUsage;
  }

  const fs::path out(flags.out);
  try {
    if (verb == "train") return CmdTrain(config, out, os);
    if (verb == "verify") return CmdVerify(config, out, os);
    if (verb == "bench-fhe") return CmdBenchFhe(config, out, os);
    if (verb == "attack") return CmdAttack(config, out, os);
    return CmdGenData(config, out, os);
  } catch (const std::exception& e) {
    es << "fedshield " << verb << ": " << e.what() << "\n";
    return kExitFailure;
  }
}

inline int Main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return Run(args, std::cout, std::cerr);
}

}  // namespace fedshield::cli

#endif  // FEDSHIELD_CLI_APP_HPP_
