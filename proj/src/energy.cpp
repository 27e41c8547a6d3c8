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


#include "tpsim/energy.hpp"

#include <fmt/format.h>

namespace tpsim {

ValidationResult validate(const EnergyConstants& k) {
  ValidationResult r;
  if (k.e_c2c < 0) r.violations.push_back("energy.e_c2c >= 0");
  if (k.e_l3_l2 < 0) r.violations.push_back("energy.e_l3_l2 >= 0");
  if (k.e_l2_l1 < 0) r.violations.push_back("energy.e_l2_l1 >= 0");
  if (k.core_power < 0) r.violations.push_back("energy.core_power >= 0");
  if (k.cores_per_chip < 0) r.violations.push_back("energy.cores_per_chip >= 0");
  return r;
}

EnergyReport energy_total(const Counters& c, const EnergyConstants& k) {
  EnergyReport r;
  const std::size_t n = c.compute_time.size();
  r.chips.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto& e = r.chips[j];
    e.c2c = static_cast<double>(c.c2c_sent_bytes[j]) * k.e_c2c;
    e.compute = k.chip_power() * c.compute_time[j];
    e.l3_l2 = static_cast<double>(c.l3_bytes[j]) * k.e_l3_l2;
    e.l2_l1 = static_cast<double>(c.l2_l1_bytes[j]) * k.e_l2_l1;
    r.totals.compute += e.compute;
    r.totals.l3_l2 += e.l3_l2;
    r.totals.l2_l1 += e.l2_l1;
  }
  // Summed once from the global count so the link term is exact.
  r.totals.c2c = static_cast<double>(c.c2c_bytes) * k.e_c2c;
  r.total_energy = r.totals.total();
  return r;
}

EnergyReport energy_total(const Timeline& t, const EnergyConstants& k) {
  return energy_total(t.counters(), k);
}

double edp(const EnergyReport& report, double makespan) { return report.total_energy * makespan; }

nlohmann::json to_json(const EnergyReport& r) {
  auto comp = [](const EnergyComponents& e) {
    return nlohmann::json{{"c2c", e.c2c},
                          {"compute", e.compute},
                          {"l3_l2", e.l3_l2},
                          {"l2_l1", e.l2_l1},
                          {"total", e.total()}};
  };
  nlohmann::json chips = nlohmann::json::array();
  for (const auto& c : r.chips) chips.push_back(comp(c));
  return {{"chips", chips}, {"totals", comp(r.totals)}, {"total_energy", r.total_energy},
          {"edp", r.edp}};
}

std::string to_csv(const EnergyReport& r) {
  std::string out = "chip,c2c_j,compute_j,l3_l2_j,l2_l1_j,total_j\n";
  auto row = [&](const std::string& id, const EnergyComponents& e) {
    out += fmt::format("{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}\n", id, e.c2c, e.compute, e.l3_l2,
                       e.l2_l1, e.total());
  };
  for (std::size_t j = 0; j < r.chips.size(); ++j) row(std::to_string(j), r.chips[j]);
  row("total", r.totals);
  return out;
}

}  // namespace tpsim
