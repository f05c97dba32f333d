// Copyright 2026 The wdaseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// JSON conversions for configuration records. Doubles round-trip exactly.

#include <json.hpp>

#include "wdaseg/losses.hpp"
#include "wdaseg/nets.hpp"
#include "wdaseg/synthdata.hpp"
#include "wdaseg/trainer.hpp"

namespace wdaseg::synth {
void to_json(nlohmann::json& j, const Rgb& c);
void from_json(const nlohmann::json& j, Rgb& c);
void to_json(nlohmann::json& j, const DomainParams& dp);
void from_json(const nlohmann::json& j, DomainParams& dp);
void to_json(nlohmann::json& j, const BenchmarkSpec& s);
void from_json(const nlohmann::json& j, BenchmarkSpec& s);
}  // namespace wdaseg::synth

namespace wdaseg::nets {
void to_json(nlohmann::json& j, const SegNetConfig& c);
void from_json(const nlohmann::json& j, SegNetConfig& c);
}  // namespace wdaseg::nets

namespace wdaseg::losses {
void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);
}  // namespace wdaseg::losses

namespace wdaseg::train {
/// Missing keys keep the values already in the target, so a partial object
/// overrides a base configuration.
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
}  // namespace wdaseg::train
