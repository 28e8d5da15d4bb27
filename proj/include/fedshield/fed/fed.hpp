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


// Umbrella header for the federated orchestration layer.

#ifndef FEDSHIELD_FED_FED_HPP_
#define FEDSHIELD_FED_FED_HPP_

#include "fedshield/fed/aggregate.hpp"
#include "fedshield/fed/config.hpp"
#include "fedshield/fed/messages.hpp"
#include "fedshield/fed/metrics.hpp"
#include "fedshield/fed/orchestrator.hpp"

#endif  // FEDSHIELD_FED_FED_HPP_
