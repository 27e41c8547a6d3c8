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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tpsim/error.hpp"
#include "tpsim/model.hpp"
#include "tpsim/partition.hpp"

namespace tpsim {

/// One MCU of the multi-chip system. Defaults model an 8-core RISC-V cluster
/// at 500 MHz with 256 KiB L1 and 2 MiB L2 scratchpads.
struct ChipSpec {
  int cores = 8;
  double clock_hz = 5e8;
  double macs_per_core_per_cycle = 2.0;
  std::int64_t l1_bytes = 262'144;
  std::int64_t l2_bytes = 2'097'152;
  double l1_bandwidth_bits = 256.0;  // per cycle, cores <-> L1
  /// Off-chip L3 port, bytes/s. Calibration knob, not a measured value.
  double l3_bandwidth = 0.8e9;
  /// L2 reserved for L3 tile staging whenever something is streamed.
  std::int64_t staging_bytes = 65'536;

  double l2_l1_bytes_per_second() const { return l1_bandwidth_bits / 8.0 * clock_hz; }
};

/// Chip-to-chip serial link.
struct LinkSpec {
  double bandwidth = 5e8;         // bytes/s
  double latency = 1e-6;          // s per message
  double energy_per_byte = 1e-10; // J/B
};

ValidationResult validate(const ChipSpec& chip);
ValidationResult validate(const LinkSpec& link);

/// Saturating per-kernel utilization:
///   util(d) = u_max * d / (d + k_half)
/// where d is the kernel's innermost output dimension (N for matmuls, the row
/// length for row-wise kernels).
struct EfficiencyModel {
  double u_max = 0.8;
  double k_half = 16.0;
  std::int64_t fixed_overhead_cycles = 100;
  // Arithmetic ops per element for the non-matmul kernels.
  double softmax_ops = 8.0;
  double gelu_ops = 12.0;
  double norm_ops = 6.0;
  double elementwise_ops = 1.0;

  double util(std::int64_t inner_dim) const;
};

enum class KernelKind { kGemm, kGemv, kSoftmax, kGelu, kNorm, kElementwise };
std::string_view to_string(KernelKind k);

struct KernelDesc {
  KernelKind kind = KernelKind::kGemm;
  std::int64_t m = 1;  // rows
  std::int64_t n = 1;  // output columns / row length
  std::int64_t k = 1;  // reduction length (matmuls only)
  std::int64_t bytes_in = 0;
  std::int64_t bytes_out = 0;
  std::string label;

  /// (m x k) * (k x n); kind is kGemv when m == 1.
  static KernelDesc matmul(std::int64_t m, std::int64_t n, std::int64_t k,
                           std::int64_t bytes_per_elem, std::string label);
  static KernelDesc rowwise(KernelKind kind, std::int64_t rows, std::int64_t len,
                            std::int64_t bytes_per_elem, std::string label);

  bool is_matmul() const { return kind == KernelKind::kGemm || kind == KernelKind::kGemv; }
  std::int64_t macs() const { return is_matmul() ? m * n * k : 0; }
};

/// Unrounded work term: ops / (cores * macs_per_core_per_cycle * util).
double kernel_work_cycles(const KernelDesc& k, const ChipSpec& chip, const EfficiencyModel& eff);
/// fixed_overhead + ceil(work term).
std::int64_t kernel_cycles(const KernelDesc& k, const ChipSpec& chip, const EfficiencyModel& eff);

// ---------------------------------------------------------------------------
// Residency

enum class Home { kL2Resident, kL3Streamed };

enum class ActivationKind { kInput, kQkv, kScores, kContext, kPartial, kFcHidden, kKvCache };
inline constexpr std::array<ActivationKind, 7> kActivationKinds = {
    ActivationKind::kInput,   ActivationKind::kQkv,      ActivationKind::kScores,
    ActivationKind::kContext, ActivationKind::kPartial,  ActivationKind::kFcHidden,
    ActivationKind::kKvCache};
std::string_view to_string(ActivationKind a);
std::int64_t activation_component(const ActivationBytes& a, ActivationKind kind);

struct ResidencyPlan {
  int n_chips = 1;
  std::array<Home, 6> homes{};  // indexed in kWeightTensors order
  std::array<std::int64_t, 6> shard_bytes{};
  std::vector<ActivationKind> spilled;
  bool double_buffer = false;
  bool all_blocks_resident = false;

  std::int64_t block_shard_bytes = 0;   // per chip, one block
  std::int64_t activation_bytes = 0;    // per chip, full working set
  std::int64_t extra_bytes = 0;         // norm gains on the root
  std::int64_t l2_footprint = 0;        // what the plan actually keeps in L2

  Home home(WeightTensor t) const;
  bool is_spilled(ActivationKind a) const;
  std::int64_t resident_weight_bytes() const;
  std::int64_t streamed_weight_bytes() const;
};

/// Places one chip's shards and activations in L2 (SPMD: the root chip's
/// footprint, which also holds the norm gains, decides for all chips).
ResidencyPlan plan_residency(const ModelConfig& cfg, const PartitionPlan& plan,
                             const ChipSpec& chip);

// ---------------------------------------------------------------------------
// Timeline

enum class Category { kCompute, kC2C, kL2, kL3 };
std::string_view to_string(Category c);

struct Event {
  double start = 0.0;
  double end = 0.0;
  Category category = Category::kCompute;
  int chip = 0;
  int peer = -1;             // c2c receiver
  std::string label;
  std::int64_t bytes = 0;    // c2c: message; l3: L3<->L2; compute/l2: L2<->L1
  std::int64_t macs = 0;
  bool background = false;   // next-block prefetch hidden behind the block

  double duration() const { return end - start; }
};

struct Counters {
  std::int64_t c2c_messages = 0;
  std::int64_t c2c_bytes = 0;
  std::vector<std::int64_t> c2c_sent_bytes;
  std::vector<std::int64_t> l3_bytes;
  std::vector<std::int64_t> l2_l1_bytes;
  std::vector<double> compute_time;
  std::int64_t macs = 0;

  bool operator==(const Counters&) const = default;
};

struct Breakdown {
  double compute = 0.0;
  double c2c = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double idle = 0.0;
  double makespan = 0.0;

  double fraction(Category c) const;
};

class Timeline {
 public:
  explicit Timeline(int n_chips = 1);

  void add(Event e);

  int n_chips() const { return n_chips_; }
  const std::vector<Event>& events() const { return events_; }
  /// Events on `chip` (including c2c it receives), sorted by start time.
  std::vector<Event> chip_events(int chip) const;
  const Counters& counters() const { return counters_; }
  /// Counters rebuilt from the event list.
  Counters recount() const;

  /// Max end over foreground events.
  double makespan() const;
  /// Union of foreground busy intervals per category on `chip`.
  Breakdown breakdown(int chip = 0) const;
  /// True if no two events on one resource (compute, L3 port, directed link) overlap.
  bool resources_exclusive() const;

 private:
  int n_chips_;
  std::vector<Event> events_;
  Counters counters_;
};

// ---------------------------------------------------------------------------
// Simulation

enum class PrefetchModel {
  /// Loads of L2-resident shards belong to the previous block's window:
  /// charged as background L3 traffic, excluded from makespan.
  kHideResident,
  /// Double-buffered prefetch overlaps the block (phase time = max of the
  /// two); without double buffering resident shards load before first use.
  kStrictSteadyState,
};
std::string_view to_string(PrefetchModel p);
std::optional<PrefetchModel> parse_prefetch_model(std::string_view s);

struct SimOptions {
  PrefetchModel prefetch = PrefetchModel::kHideResident;
  /// When set, L2<->L1 transfers take bytes / L1 bandwidth of foreground time.
  bool charge_l2_time = false;
};

struct Platform {
  ChipSpec chip;
  LinkSpec link;
  EfficiencyModel efficiency;
  SimOptions options;
  int fan_in = 4;
};

/// Rows of an activation panel that fit the L1 panel budget (l1_bytes / 4);
/// an L3-streamed weight is re-streamed once per panel.
std::int64_t stream_passes(const KernelDesc& k, std::int64_t bytes_per_elem, const ChipSpec& chip);

/// Deterministic event-driven simulation of one block. Throws kInconsistentPlan.
Timeline simulate_block(const ModelConfig& cfg, const PartitionPlan& plan,
                        const ResidencyPlan& residency, const Platform& platform);

struct SweepPoint {
  int n_chips = 1;
  bool ok = false;
  std::string error;
  double makespan = 0.0;
  double speedup = 0.0;
  Breakdown breakdown;
  ResidencyPlan residency;
  std::optional<Timeline> timeline;
};

/// Simulates each chip count (in parallel) and reports speedup against one
/// chip. Entries that cannot be planned carry their error and ok == false.
std::vector<SweepPoint> sweep(const ModelConfig& cfg, const std::vector<int>& n_chips_list,
                              const Platform& platform);

}  // namespace tpsim
