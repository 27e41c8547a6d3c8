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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tpsim/config_io.hpp"
#include "tpsim/energy.hpp"
#include "tpsim/model.hpp"
#include "tpsim/perf.hpp"

namespace tpsim {

inline constexpr int kRunSchemaVersion = 1;
inline constexpr std::uint64_t kDefaultSeed = 20240501;

enum class OutputFormat { kCsv, kJson };

struct RunSpec {
  std::string source = "tinyllama";  // preset name or config file
  std::optional<Mode> mode;
  std::vector<int> chips = {1};
  OutputFormat format = OutputFormat::kCsv;
  std::uint64_t seed = kDefaultSeed;
  /// "chip.l3_bandwidth=1e9" style calibration overrides, or "model.H=16".
  std::vector<std::string> overrides;
  std::string series;  // defaults to "<name>/<mode>"
};

/// "1,2,4,8" or a power-of-two range "1..64". Throws Error(kInvalidConfig).
std::vector<int> parse_chip_list(std::string_view text);

struct ResolvedRun {
  std::string name;
  std::string series;
  ModelConfig model;
  Calibration calibration;
};

/// Loads the preset or config file and applies mode and overrides.
ResolvedRun resolve(const RunSpec& spec);

struct RunRow {
  SweepPoint point;
  EnergyReport energy;
};

std::vector<RunRow> run_sweep(const ResolvedRun& run, const std::vector<int>& chips);

/// Column names of a run table, in order.
const std::vector<std::string>& run_columns();
std::string render_csv(const ResolvedRun& run, const RunSpec& spec, const std::vector<RunRow>& rows);
nlohmann::json render_json(const ResolvedRun& run, const RunSpec& spec,
                           const std::vector<RunRow>& rows);

/// Writes the table to `out_path`, or `out` when empty. Returns the exit code.
int cmd_run(const RunSpec& spec, const std::optional<std::filesystem::path>& out_path,
            std::ostream& out, std::ostream& err);

enum class Fault { kNone, kDuplicateShard };

struct VerifyCase {
  int n_chips = 1;
  bool ok = false;
  double max_rel_error = 0.0;
  std::string message;
};

inline constexpr double kVerifyTolerance = 1e-5;

std::vector<VerifyCase> verify_equivalence(const ModelConfig& cfg, const std::vector<int>& chips,
                                           std::uint64_t seed, Fault fault = Fault::kNone,
                                           int fan_in = 4);

/// 0 on pass, 1 on a failed case, 2 on a configuration error.
int cmd_verify(const RunSpec& spec, Fault fault, std::ostream& out, std::ostream& err);

/// Concatenates run files (CSV or JSON) into one CSV with a series column.
int cmd_report(const std::vector<std::filesystem::path>& inputs,
               const std::optional<std::filesystem::path>& out_path, std::ostream& out,
               std::ostream& err);

}  // namespace tpsim
