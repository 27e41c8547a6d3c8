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

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tpsim/energy.hpp"
#include "tpsim/model.hpp"
#include "tpsim/perf.hpp"

namespace tpsim {

/// Every tunable constant of the simulator in one place.
struct Calibration {
  Platform platform;
  EnergyConstants energy;
};

/// Calibration with the link energy shared between the link and energy models.
Calibration default_calibration();

/// Sets one constant by dotted key, e.g. "chip.l3_bandwidth". Throws
/// Error(kInvalidConfig) for unknown keys or unparsable values.
void set_calibration(Calibration& c, std::string_view key, std::string_view value);
/// All constants as (key, value) in a fixed order, values round-trip exact.
std::vector<std::pair<std::string, std::string>> calibration_entries(const Calibration& c);

/// Sets one model field by short key (S, E, P, H, F, L, mode, bytes_per_elem,
/// kv_cache_len, causal, norm, gelu).
void set_model_field(ModelConfig& cfg, std::string_view key, std::string_view value);

struct LoadedConfig {
  std::string name;
  ModelConfig model;
  Calibration calibration;
};

/// Reads an INI file. A [model] section may name a base `preset`; other keys
/// override it. [chip], [link], [efficiency], [energy] and [sim] sections set
/// calibration constants. Throws Error(kIo) or Error(kInvalidConfig).
LoadedConfig load_config(const std::filesystem::path& path);

/// $TPSIM_CONFIG_DIR, or "configs" when unset.
std::filesystem::path default_config_dir();
/// An existing path as given, else <config dir>/<name> or <name>.ini there.
std::optional<std::filesystem::path> resolve_config(std::string_view name);

/// Shortest decimal that round-trips.
std::string format_number(double v);

}  // namespace tpsim
