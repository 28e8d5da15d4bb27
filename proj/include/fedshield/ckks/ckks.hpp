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

#ifndef FEDSHIELD_CKKS_CKKS_HPP_
#define FEDSHIELD_CKKS_CKKS_HPP_

#include "fedshield/ckks/context.hpp"
#include "fedshield/ckks/encoder.hpp"
#include "fedshield/ckks/modarith.hpp"
#include "fedshield/ckks/ntt.hpp"
#include "fedshield/ckks/scheme.hpp"
#include "fedshield/ckks/serialize.hpp"

#endif  // FEDSHIELD_CKKS_CKKS_HPP_
