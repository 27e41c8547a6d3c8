/*
 * Copyright 2026 The tpsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <json.hpp>

#include "tpsim/model.hpp"
#include "tpsim/partition.hpp"

namespace tpsim {

inline constexpr int kPlanSchemaVersion = 1;

nlohmann::json config_to_json(const ModelConfig& cfg);
/// Throws Error(kInvalidConfig) on missing or malformed fields.
ModelConfig config_from_json(const nlohmann::json& j);

/// Layout:
///   { "schema_version": 1, "n_chips": N, "config": {...},
///     "shards": [ {"chip", "tensor", "rows": [b, e], "cols": [b, e]} ... ],
///     "chip_weight_bytes": [...],
///     "tree": {"fan_in", "root", "levels": [[{"receiver", "senders": [...]}]]},
///     "schedule": [ {"label", "norm_chip",
///                    "reduce": [{"src","dst","bytes","label","level"}],
///                    "broadcast": [...]} ] }
nlohmann::json plan_to_json(const PartitionPlan& plan);
PartitionPlan plan_from_json(const nlohmann::json& j);

}  // namespace tpsim
