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

#include <string>
#include <vector>

#include <json.hpp>

#include "tpsim/error.hpp"
#include "tpsim/perf.hpp"

namespace tpsim {

struct EnergyConstants {
  double e_c2c = 1e-10;     // J/B over a chip-to-chip link
  double e_l3_l2 = 1e-10;   // J/B between off-chip memory and L2
  double e_l2_l1 = 2e-12;   // J/B between L2 and L1
  double core_power = 1.3e-2;  // W per core while computing
  int cores_per_chip = 8;

  double chip_power() const { return core_power * cores_per_chip; }
};

ValidationResult validate(const EnergyConstants& k);

struct EnergyComponents {
  double c2c = 0.0;
  double compute = 0.0;
  double l3_l2 = 0.0;
  double l2_l1 = 0.0;

  double total() const { return c2c + compute + l3_l2 + l2_l1; }
};

struct EnergyReport {
  std::vector<EnergyComponents> chips;  // c2c charged to the sender
  EnergyComponents totals;
  double total_energy = 0.0;
  double edp = 0.0;  // set once a makespan is known
};

/// E = c2c_bytes * e_c2c + sum_j [P * T_comp,j + l3_j * e_l3_l2 + l2l1_j * e_l2_l1].
EnergyReport energy_total(const Timeline& t, const EnergyConstants& k);
EnergyReport energy_total(const Counters& c, const EnergyConstants& k);

double edp(const EnergyReport& report, double makespan);

nlohmann::json to_json(const EnergyReport& r);
/// One row per chip, then a "total" row.
std::string to_csv(const EnergyReport& r);

}  // namespace tpsim
