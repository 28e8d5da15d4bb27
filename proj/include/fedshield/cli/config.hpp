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


// Configuration files and dotted-key overrides for the command-line tool.
//
// Two file forms are accepted:
//   * INI: `[section]` headers followed by `key = value` lines; `#` and `;`
//     start comments. `[prune]` + `p0 = 0.3` sets `prune.p0`.
//   * A metrics header: a first non-empty line holding a JSON object whose
//     "config" member maps dotted keys to string values. This is the header
//     that `train` writes, so a metrics file can be fed back as a config.

#ifndef FEDSHIELD_CLI_CONFIG_HPP_
#define FEDSHIELD_CLI_CONFIG_HPP_

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fedshield/attack/dlg.hpp"
#include "fedshield/common/error.hpp"
#include "fedshield/fed/config.hpp"
#include "json.hpp"

namespace fedshield::cli {

inline constexpr std::string_view kArtifactVersion = "fedshield-1.0.0";

struct BenchConfig {
  std::uint64_t vector_len = 30'000'000;
  int clients = 3;
  std::uint64_t max_ciphertexts = 4;  // measured; the rest is extrapolated
};

struct CliConfig {
  fed::RunConfig run;
  attack::AttackConfig attack;
  BenchConfig bench;
  bool include_timings = false;
  double decode_scale_factor = 1.0;  // verify only
};

namespace internal {

inline std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
T ParseNumber(std::string_view s) {
  const std::string t = Trim(s);
  T v{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  Require(!t.empty() && ec == std::errc() && ptr == t.data() + t.size(), ErrorCode::kConfig,
          "invalid number '" + t + "'");
  if constexpr (std::is_floating_point_v<T>) {
    Require(std::isfinite(v), ErrorCode::kConfig, "non-finite number '" + t + "'");
  }
  return v;
}

inline bool ParseBool(std::string_view s) {
  const std::string t = Trim(s);
  if (t == "true" || t == "1" || t == "on") return true;
  if (t == "false" || t == "0" || t == "off") return false;
  Fail(ErrorCode::kConfig, "invalid boolean '" + t + "'");
}

template <typename T>
std::vector<T> ParseList(std::string_view s) {
  std::vector<T> out;
  const std::string t = Trim(s);
  if (t.empty()) return out;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(ParseNumber<T>(item));
  return out;
}

template <typename T>
std::string FormatList(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += FormatDouble(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

}  // namespace internal

struct ConfigKey {
  std::string name;
  std::function<std::string(const CliConfig&)> get;
  std::function<void(CliConfig&, std::string_view)> set;
};

namespace internal {

// Accessor-based key builders. `ref` maps a config to the bound field.
template <typename T, typename Ref>
ConfigKey Number(std::string name, Ref ref) {
  return ConfigKey{
      std::move(name),
      [ref](const CliConfig& c) {
        const T& v = ref(c);
        if constexpr (std::is_floating_point_v<T>) {
          return FormatDouble(v);
        } else {
          return std::to_string(v);
        }
      },
      [ref](CliConfig& c, std::string_view s) { ref(c) = ParseNumber<T>(s); }};
}

template <typename T, typename Ref>
ConfigKey List(std::string name, Ref ref) {
  return ConfigKey{std::move(name), [ref](const CliConfig& c) { return FormatList(ref(c)); },
                   [ref](CliConfig& c, std::string_view s) { ref(c) = ParseList<T>(s); }};
}

template <typename Ref>
ConfigKey Bool(std::string name, Ref ref) {
  return ConfigKey{std::move(name),
                   [ref](const CliConfig& c) { return std::string(ref(c) ? "true" : "false"); },
                   [ref](CliConfig& c, std::string_view s) { ref(c) = ParseBool(s); }};
}

template <typename Ref, typename NameFn, typename ParseFn>
ConfigKey Enum(std::string name, Ref ref, NameFn to_name, ParseFn parse) {
  return ConfigKey{std::move(name),
                   [ref, to_name](const CliConfig& c) { return std::string(to_name(ref(c))); },
                   [ref, parse](CliConfig& c, std::string_view s) {
                     try {
                       ref(c) = parse(Trim(s));
                     } catch (const Error& e) {
                       Fail(ErrorCode::kConfig, e.what());
                     }
                   }};
}

}  // namespace internal

#define FEDSHIELD_REF(expr) [](auto& c) -> auto& { return c.expr; }

/// Every recognized key, in header order.
inline const std::vector<ConfigKey>& ConfigKeys() {
  using namespace internal;  // NOLINT
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    k.push_back(Enum("run.mode", FEDSHIELD_REF(run.mode), fed::ModeName, fed::ParseMode));
    k.push_back(Number<int>("run.clients", FEDSHIELD_REF(run.n_clients)));
    k.push_back(Number<int>("run.clients_per_round", FEDSHIELD_REF(run.clients_per_round)));
    k.push_back(Number<int>("run.rounds", FEDSHIELD_REF(run.rounds)));
    k.push_back(Number<std::uint64_t>("run.seed", FEDSHIELD_REF(run.seed)));
    k.push_back(Number<int>("run.threads", FEDSHIELD_REF(run.threads)));
    k.push_back(Number<double>("run.dropout_prob", FEDSHIELD_REF(run.dropout_prob)));
    k.push_back(List<int>("run.forced_dropouts", FEDSHIELD_REF(run.forced_dropouts)));
    k.push_back(Number<int>("run.checkpoint_every", FEDSHIELD_REF(run.checkpoint_every)));
    k.push_back(Enum("run.key_authority", FEDSHIELD_REF(run.key_authority), fed::KeyPlacementName,
                     fed::ParseKeyPlacement));
    k.push_back(Enum("run.weighting", FEDSHIELD_REF(run.weighting), fed::WeightingName, fed::ParseWeighting));
    k.push_back(Enum("run.averaging", FEDSHIELD_REF(run.averaging), fed::AveragingName, fed::ParseAveraging));

    k.push_back(Number<double>("train.lr", FEDSHIELD_REF(run.train.lr)));
    k.push_back(Number<int>("train.epochs", FEDSHIELD_REF(run.train.epochs)));
    k.push_back(Enum("train.optimizer", FEDSHIELD_REF(run.train.optimizer), lora::OptimizerName, lora::ParseOptimizer));
    k.push_back(Number<std::size_t>("train.batch_size", FEDSHIELD_REF(run.train.batch_size)));
    k.push_back(Number<double>("train.divergence_threshold", FEDSHIELD_REF(run.train.divergence_threshold)));

    k.push_back(Enum("prune.enabled", FEDSHIELD_REF(run.prune_enabled), fed::PruneToggleName, fed::ParsePruneToggle));
    k.push_back(Number<double>("prune.p0", FEDSHIELD_REF(run.schedule.p0)));
    k.push_back(Number<double>("prune.p_target", FEDSHIELD_REF(run.schedule.p_target)));
    k.push_back(Number<int>("prune.t_eff", FEDSHIELD_REF(run.schedule.t_eff)));
    k.push_back(Number<int>("prune.t_target", FEDSHIELD_REF(run.schedule.t_target)));
    k.push_back(Enum("prune.granularity", FEDSHIELD_REF(run.granularity), pruning::GranularityName,
                     pruning::ParseGranularity));

    k.push_back(Number<std::size_t>("ckks.poly_degree", FEDSHIELD_REF(run.ckks.poly_degree)));
    k.push_back(List<int>("ckks.modulus_bits", FEDSHIELD_REF(run.ckks.modulus_bits)));
    k.push_back(ConfigKey{"ckks.scale_bits", [](const CliConfig& c) { return FormatDouble(std::log2(c.run.ckks.scale)); },
                          [](CliConfig& c, std::string_view s) {
                            const double bits = ParseNumber<double>(s);
                            Require(bits > 0 && bits < 100, ErrorCode::kConfig, "ckks.scale_bits must be in (0, 100)");
                            c.run.ckks.scale = std::exp2(bits);
                          }});
    k.push_back(Number<double>("ckks.noise_stddev", FEDSHIELD_REF(run.ckks.noise_stddev)));

    k.push_back(Number<double>("dp.clip", FEDSHIELD_REF(run.dp.clip)));
    k.push_back(Number<double>("dp.sigma", FEDSHIELD_REF(run.dp.sigma)));

    k.push_back(List<int>("model.layers", FEDSHIELD_REF(run.model.layer_sizes)));
    k.push_back(List<int>("model.ranks", FEDSHIELD_REF(run.model.ranks)));
    k.push_back(Number<double>("model.alpha", FEDSHIELD_REF(run.model.alpha)));
    k.push_back(Enum("model.hidden_activation", FEDSHIELD_REF(run.model.hidden_activation), lora::ActivationName,
                     lora::ParseActivation));
    k.push_back(Enum("model.output_activation", FEDSHIELD_REF(run.model.output_activation), lora::ActivationName,
                     lora::ParseActivation));

    k.push_back(Enum("data.task", FEDSHIELD_REF(run.task.task), lora::TaskName, lora::ParseTask));
    k.push_back(Number<std::size_t>("data.samples_per_client", FEDSHIELD_REF(run.samples_per_client)));
    k.push_back(Number<std::size_t>("data.validation_size", FEDSHIELD_REF(run.validation_size)));
    k.push_back(Number<double>("data.noise", FEDSHIELD_REF(run.task.noise)));
    k.push_back(Number<int>("data.planted_rank", FEDSHIELD_REF(run.task.planted_rank)));
    k.push_back(Number<double>("data.shift_scale", FEDSHIELD_REF(run.task.shift_scale)));
    k.push_back(Number<double>("data.separation", FEDSHIELD_REF(run.task.separation)));

    k.push_back(Bool("metrics.include_timings", FEDSHIELD_REF(include_timings)));

    k.push_back(Number<int>("attack.steps", FEDSHIELD_REF(attack.steps)));
    k.push_back(Number<double>("attack.lr", FEDSHIELD_REF(attack.lr)));
    k.push_back(Number<int>("attack.trials", FEDSHIELD_REF(attack.trials)));
    k.push_back(List<double>("attack.rates", FEDSHIELD_REF(attack.rates)));
    k.push_back(Number<std::uint64_t>("attack.seed", FEDSHIELD_REF(attack.seed)));
    k.push_back(Number<double>("attack.init_std", FEDSHIELD_REF(attack.init_std)));
    k.push_back(Number<int>("attack.restarts", FEDSHIELD_REF(attack.restarts)));
    k.push_back(Enum("attack.init", FEDSHIELD_REF(attack.init), attack::InitKindName, attack::ParseInitKind));
    k.push_back(Bool("attack.line_search", FEDSHIELD_REF(attack.line_search)));
    k.push_back(Number<int>("attack.threads", FEDSHIELD_REF(attack.threads)));
    k.push_back(Number<int>("attack.victim_d_in", FEDSHIELD_REF(attack.victim.d_in)));
    k.push_back(Number<int>("attack.victim_d_out", FEDSHIELD_REF(attack.victim.d_out)));
    k.push_back(Number<int>("attack.victim_rank", FEDSHIELD_REF(attack.victim.rank)));
    k.push_back(Number<double>("attack.victim_alpha", FEDSHIELD_REF(attack.victim.alpha)));
    k.push_back(Number<double>("attack.victim_b_scale", FEDSHIELD_REF(attack.victim.b_scale)));
    k.push_back(Number<double>("attack.victim_lr", FEDSHIELD_REF(attack.victim.lr)));

    k.push_back(Number<std::uint64_t>("bench.vector_len", FEDSHIELD_REF(bench.vector_len)));
    k.push_back(Number<int>("bench.clients", FEDSHIELD_REF(bench.clients)));
    k.push_back(Number<std::uint64_t>("bench.max_ciphertexts", FEDSHIELD_REF(bench.max_ciphertexts)));

    k.push_back(Number<double>("verify.decode_scale_factor", FEDSHIELD_REF(decode_scale_factor)));
    return k;
  }();
  return keys;
}

#undef FEDSHIELD_REF

inline const ConfigKey* FindKey(std::string_view name) {
  for (const auto& k : ConfigKeys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

/// Sets one dotted key. Unknown keys and malformed values raise kConfig.
inline void SetKey(CliConfig& c, std::string_view key, std::string_view value) {
  const ConfigKey* k = FindKey(key);
  Require(k != nullptr, ErrorCode::kConfig, "unknown key '" + std::string(key) + "'");
  try {
    k->set(c, value);
  } catch (const Error& e) {
    Fail(ErrorCode::kConfig, "key '" + std::string(key) + "': " + e.what());
  }
}

inline std::string GetKey(const CliConfig& c, std::string_view key) {
  const ConfigKey* k = FindKey(key);
  Require(k != nullptr, ErrorCode::kConfig, "unknown key '" + std::string(key) + "'");
  return k->get(c);
}

/// Dotted key -> canonical string value, for every key.
inline nlohmann::ordered_json ResolvedConfigJson(const CliConfig& c) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& k : ConfigKeys()) j[k.name] = k.get(c);
  return j;
}

inline std::string HeaderLine(const CliConfig& c) {
  nlohmann::ordered_json j;
  j["type"] = "header";
  j["version"] = kArtifactVersion;
  j["config"] = ResolvedConfigJson(c);
  return j.dump() + "\n";
}

/// Applies config text to `c`. `source` prefixes diagnostics.
inline void ApplyConfigText(CliConfig& c, std::string_view text, const std::string& source) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::string section;
  int line_no = 0;
  bool seen_content = false;
  auto fail = [&](const std::string& msg) { Fail(ErrorCode::kConfig, source + ":" + std::to_string(line_no) + ": " + msg); };
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = internal::Trim(line);
    if (t.empty()) continue;
    if (!seen_content && t.front() == '{') {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(t);
      } catch (const nlohmann::json::exception& e) {
        fail(std::string("malformed header: ") + e.what());
      }
      if (!j.is_object() || !j.contains("config") || !j["config"].is_object()) fail("header has no config object");
      for (const auto& [key, value] : j["config"].items()) {
        if (!value.is_string()) fail("key '" + key + "': value must be a string");
        try {
          SetKey(c, key, value.get<std::string>());
        } catch (const Error& e) {
          fail(e.what());
        }
      }
      return;  // remaining lines are round records
    }
    seen_content = true;
    if (t.front() == '#' || t.front() == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') fail("unterminated section header");
      section = internal::Trim(std::string_view(t).substr(1, t.size() - 2));
      if (section.empty()) fail("empty section name");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    std::string key = internal::Trim(std::string_view(t).substr(0, eq));
    std::string value = internal::Trim(std::string_view(t).substr(eq + 1));
    if (const auto hash = value.find(" #"); hash != std::string::npos) value = internal::Trim(value.substr(0, hash));
    if (key.empty()) fail("missing key");
    if (!section.empty()) key = section + "." + key;
    try {
      SetKey(c, key, value);
    } catch (const Error& e) {
      fail(e.what());
    }
  }
}

inline void LoadConfigFile(CliConfig& c, const std::string& path) {
  std::ifstream in(path);
  Require(in.good(), ErrorCode::kConfig, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  ApplyConfigText(c, ss.str(), path);
}

}  // namespace fedshield::cli

#endif  // FEDSHIELD_CLI_CONFIG_HPP_
