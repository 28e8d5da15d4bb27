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


// JSON rendering of round records (one object per line in metrics files).

#ifndef FEDSHIELD_FED_METRICS_HPP_
#define FEDSHIELD_FED_METRICS_HPP_

#include <string>

#include "fedshield/fed/orchestrator.hpp"
#include "json.hpp"

namespace fedshield::fed {

using OrderedJson = nlohmann::ordered_json;

/// Timings are wall-clock and vary between runs; leave them out when
/// byte-identical metrics are wanted.
inline OrderedJson RoundToJson(const RoundRecord& r, bool include_timings) {
  OrderedJson j;
  j["round"] = r.round;
  j["mode"] = ModeName(r.mode);
  j["p_t"] = r.p_t;
  j["selected"] = r.selected;
  j["survivors"] = r.survivors;
  j["client_losses"] = r.client_losses;
  j["global_loss"] = r.global_loss;
  j["grad_norm_sq"] = r.grad_norm_sq;
  j["update_norm"] = r.update_norm;
  j["prune_error_norms"] = r.prune_error_norms;
  j["upload_bytes"] = r.upload_bytes;
  if (include_timings) {
    j["timings"] = {{"train", r.timings.train},
                    {"encrypt", r.timings.encrypt},
                    {"aggregate", r.timings.aggregate},
                    {"decrypt", r.timings.decrypt}};
  }
  return j;
}

inline std::string RoundToJsonLine(const RoundRecord& r, bool include_timings) {
  return RoundToJson(r, include_timings).dump() + "\n";
}

}  // namespace fedshield::fed

#endif  // FEDSHIELD_FED_METRICS_HPP_
