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


#include "tpsim/perf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>
#include <utility>

#include <fmt/format.h>

namespace tpsim {

ValidationResult validate(const ChipSpec& chip) {
  ValidationResult r;
  if (chip.cores < 1) r.violations.push_back("chip.cores >= 1");
  if (!(chip.clock_hz > 0)) r.violations.push_back("chip.clock_hz > 0");
  if (!(chip.macs_per_core_per_cycle > 0)) r.violations.push_back("chip.macs_per_cycle > 0");
  if (chip.l1_bytes < 1) r.violations.push_back("chip.l1_bytes >= 1");
  if (chip.l2_bytes < 1) r.violations.push_back("chip.l2_bytes >= 1");
  if (!(chip.l1_bandwidth_bits > 0)) r.violations.push_back("chip.l1_bandwidth_bits > 0");
  if (!(chip.l3_bandwidth > 0)) r.violations.push_back("chip.l3_bandwidth > 0");
  if (chip.staging_bytes < 0 || chip.staging_bytes >= chip.l2_bytes) {
    r.violations.push_back("0 <= chip.staging_bytes < chip.l2_bytes");
  }
  return r;
}

ValidationResult validate(const LinkSpec& link) {
  ValidationResult r;
  if (!(link.bandwidth > 0)) r.violations.push_back("link.bandwidth > 0");
  if (link.latency < 0) r.violations.push_back("link.latency >= 0");
  if (link.energy_per_byte < 0) r.violations.push_back("link.energy_per_byte >= 0");
  return r;
}

double EfficiencyModel::util(std::int64_t inner_dim) const {
  const double d = static_cast<double>(std::max<std::int64_t>(inner_dim, 1));
  return u_max * d / (d + k_half);
}

std::string_view to_string(KernelKind k) {
  switch (k) {
    case KernelKind::kGemm: return "gemm";
    case KernelKind::kGemv: return "gemv";
    case KernelKind::kSoftmax: return "softmax";
    case KernelKind::kGelu: return "gelu";
    case KernelKind::kNorm: return "norm";
    case KernelKind::kElementwise: return "add";
  }
  return "?";
}

KernelDesc KernelDesc::matmul(std::int64_t m, std::int64_t n, std::int64_t k,
                              std::int64_t bytes_per_elem, std::string label) {
  KernelDesc d;
  d.kind = m == 1 ? KernelKind::kGemv : KernelKind::kGemm;
  d.m = m;
  d.n = n;
  d.k = k;
  d.bytes_in = (m * k + k * n) * bytes_per_elem;
  d.bytes_out = m * n * bytes_per_elem;
  d.label = std::move(label);
  return d;
}

KernelDesc KernelDesc::rowwise(KernelKind kind, std::int64_t rows, std::int64_t len,
                               std::int64_t bytes_per_elem, std::string label) {
  KernelDesc d;
  d.kind = kind;
  d.m = rows;
  d.n = len;
  d.k = 1;
  // An add reads two operands; the others read one.
  d.bytes_in = (kind == KernelKind::kElementwise ? 2 : 1) * rows * len * bytes_per_elem;
  d.bytes_out = rows * len * bytes_per_elem;
  d.label = std::move(label);
  return d;
}

double kernel_work_cycles(const KernelDesc& k, const ChipSpec& chip, const EfficiencyModel& eff) {
  double ops = 0.0;
  switch (k.kind) {
    case KernelKind::kGemm:
    case KernelKind::kGemv: ops = static_cast<double>(k.macs()); break;
    case KernelKind::kSoftmax: ops = eff.softmax_ops * k.m * k.n; break;
    case KernelKind::kGelu: ops = eff.gelu_ops * k.m * k.n; break;
    case KernelKind::kNorm: ops = eff.norm_ops * k.m * k.n; break;
    case KernelKind::kElementwise: ops = eff.elementwise_ops * k.m * k.n; break;
  }
  const double rate = chip.cores * chip.macs_per_core_per_cycle * eff.util(k.n);
  return ops / rate;
}

std::int64_t kernel_cycles(const KernelDesc& k, const ChipSpec& chip, const EfficiencyModel& eff) {
  return eff.fixed_overhead_cycles +
         static_cast<std::int64_t>(std::ceil(kernel_work_cycles(k, chip, eff)));
}

// ---------------------------------------------------------------------------

std::string_view to_string(ActivationKind a) {
  switch (a) {
    case ActivationKind::kInput: return "input";
    case ActivationKind::kQkv: return "qkv";
    case ActivationKind::kScores: return "scores";
    case ActivationKind::kContext: return "context";
    case ActivationKind::kPartial: return "partial_out";
    case ActivationKind::kFcHidden: return "fc_hidden";
    case ActivationKind::kKvCache: return "kv_cache";
  }
  return "?";
}

std::int64_t activation_component(const ActivationBytes& a, ActivationKind kind) {
  switch (kind) {
    case ActivationKind::kInput: return a.input;
    case ActivationKind::kQkv: return a.qkv;
    case ActivationKind::kScores: return a.scores;
    case ActivationKind::kContext: return a.context;
    case ActivationKind::kPartial: return a.partial_out;
    case ActivationKind::kFcHidden: return a.fc_hidden;
    case ActivationKind::kKvCache: return a.kv_cache;
  }
  return 0;
}

namespace {

std::size_t tensor_index(WeightTensor t) { return static_cast<std::size_t>(t); }

}  // namespace

Home ResidencyPlan::home(WeightTensor t) const { return homes[tensor_index(t)]; }

bool ResidencyPlan::is_spilled(ActivationKind a) const {
  return std::find(spilled.begin(), spilled.end(), a) != spilled.end();
}

std::int64_t ResidencyPlan::resident_weight_bytes() const {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < homes.size(); ++i) {
    if (homes[i] == Home::kL2Resident) s += shard_bytes[i];
  }
  return s;
}

std::int64_t ResidencyPlan::streamed_weight_bytes() const {
  return block_shard_bytes - resident_weight_bytes();
}

ResidencyPlan plan_residency(const ModelConfig& cfg, const PartitionPlan& plan,
                             const ChipSpec& chip) {
  ResidencyPlan r;
  r.n_chips = plan.n_chips;
  const int root = plan.tree.root;
  for (auto t : kWeightTensors) {
    r.shard_bytes[tensor_index(t)] = plan.shard(root, t).elements() * cfg.bytes_per_elem;
  }
  for (auto s : r.shard_bytes) r.block_shard_bytes += s;
  const ActivationBytes act = activation_bytes(cfg, plan.n_chips);
  r.activation_bytes = act.total();
  r.extra_bytes = norm_param_bytes(cfg);
  r.homes.fill(Home::kL2Resident);

  const std::int64_t l2 = chip.l2_bytes;
  const std::int64_t w = r.block_shard_bytes;
  const std::int64_t a = r.activation_bytes;
  const std::int64_t x = r.extra_bytes;

  if (cfg.num_blocks * (w + x) + a <= l2) {
    r.all_blocks_resident = true;
    r.l2_footprint = cfg.num_blocks * (w + x) + a;
    return r;
  }
  if (2 * w + a + x <= l2) {
    r.double_buffer = true;
    r.l2_footprint = 2 * w + a + x;
    return r;
  }

  // Activations first; spill the largest ones while they crowd out staging.
  std::vector<ActivationKind> order(kActivationKinds.begin(), kActivationKinds.end());
  std::stable_sort(order.begin(), order.end(), [&](ActivationKind p, ActivationKind q) {
    return activation_component(act, p) > activation_component(act, q);
  });
  std::int64_t kept = a;
  for (auto kind : order) {
    if (kept + x + chip.staging_bytes <= l2) break;
    const auto bytes = activation_component(act, kind);
    if (bytes == 0) continue;
    r.spilled.push_back(kind);
    kept -= bytes;
  }
  if (kept + x + chip.staging_bytes > l2) {
    throw Error(ErrorCode::kInvalidConfig,
                fmt::format("L2 of {} B cannot hold norm gains and staging", l2));
  }

  std::int64_t budget = l2 - kept - x;
  if (w <= budget && r.spilled.empty()) {
    r.l2_footprint = w + kept + x;
    return r;
  }
  budget -= chip.staging_bytes;
  std::int64_t resident = 0;
  bool stop = false;
  for (auto t : kWeightTensors) {
    const auto bytes = r.shard_bytes[tensor_index(t)];
    if (!stop && resident + bytes <= budget) {
      resident += bytes;
    } else {
      stop = true;
      r.homes[tensor_index(t)] = Home::kL3Streamed;
    }
  }
  r.l2_footprint = resident + kept + x + chip.staging_bytes;
  return r;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Category c) {
  switch (c) {
    case Category::kCompute: return "compute";
    case Category::kC2C: return "c2c";
    case Category::kL2: return "l2";
    case Category::kL3: return "l3";
  }
  return "?";
}

double Breakdown::fraction(Category c) const {
  if (makespan <= 0) return 0.0;
  switch (c) {
    case Category::kCompute: return compute / makespan;
    case Category::kC2C: return c2c / makespan;
    case Category::kL2: return l2 / makespan;
    case Category::kL3: return l3 / makespan;
  }
  return 0.0;
}

namespace {

Counters empty_counters(int n) {
  Counters c;
  c.c2c_sent_bytes.assign(n, 0);
  c.l3_bytes.assign(n, 0);
  c.l2_l1_bytes.assign(n, 0);
  c.compute_time.assign(n, 0.0);
  return c;
}

void count(Counters& c, const Event& e) {
  switch (e.category) {
    case Category::kCompute:
      c.compute_time[e.chip] += e.duration();
      c.l2_l1_bytes[e.chip] += e.bytes;
      c.macs += e.macs;
      break;
    case Category::kL2: c.l2_l1_bytes[e.chip] += e.bytes; break;
    case Category::kL3: c.l3_bytes[e.chip] += e.bytes; break;
    case Category::kC2C:
      c.c2c_messages += 1;
      c.c2c_bytes += e.bytes;
      c.c2c_sent_bytes[e.chip] += e.bytes;
      break;
  }
}

double union_length(std::vector<std::pair<double, double>> iv) {
  std::sort(iv.begin(), iv.end());
  double total = 0.0;
  double cur_s = 0.0, cur_e = -1.0;
  bool open = false;
  for (auto [s, e] : iv) {
    if (!open || s > cur_e) {
      if (open) total += cur_e - cur_s;
      cur_s = s;
      cur_e = e;
      open = true;
    } else {
      cur_e = std::max(cur_e, e);
    }
  }
  if (open) total += cur_e - cur_s;
  return total;
}

}  // namespace

Timeline::Timeline(int n_chips) : n_chips_(n_chips), counters_(empty_counters(n_chips)) {}

void Timeline::add(Event e) {
  count(counters_, e);
  events_.push_back(std::move(e));
}

std::vector<Event> Timeline::chip_events(int chip) const {
  std::vector<Event> out;
  for (const auto& e : events_) {
    if (e.chip == chip || (e.category == Category::kC2C && e.peer == chip)) out.push_back(e);
  }
  std::stable_sort(out.begin(), out.end(), [](const Event& a, const Event& b) {
    return std::tie(a.start, a.end) < std::tie(b.start, b.end);
  });
  return out;
}

Counters Timeline::recount() const {
  Counters c = empty_counters(n_chips_);
  for (const auto& e : events_) count(c, e);
  return c;
}

double Timeline::makespan() const {
  double m = 0.0;
  for (const auto& e : events_) {
    if (!e.background) m = std::max(m, e.end);
  }
  return m;
}

Breakdown Timeline::breakdown(int chip) const {
  std::map<Category, std::vector<std::pair<double, double>>> by_cat;
  std::vector<std::pair<double, double>> all;
  for (const auto& e : chip_events(chip)) {
    if (e.background || e.end <= e.start) continue;
    by_cat[e.category].emplace_back(e.start, e.end);
    all.emplace_back(e.start, e.end);
  }
  Breakdown b;
  b.makespan = makespan();
  b.compute = union_length(by_cat[Category::kCompute]);
  b.c2c = union_length(by_cat[Category::kC2C]);
  b.l2 = union_length(by_cat[Category::kL2]);
  b.l3 = union_length(by_cat[Category::kL3]);
  b.idle = std::max(0.0, b.makespan - union_length(all));
  return b;
}

bool Timeline::resources_exclusive() const {
  // Compute and L2 transfers share a chip's cores; each chip has one L3 port;
  // each directed link is its own resource.
  std::map<std::tuple<int, int, int>, std::vector<std::pair<double, double>>> res;
  for (const auto& e : events_) {
    std::tuple<int, int, int> key;
    switch (e.category) {
      case Category::kCompute:
      case Category::kL2: key = {0, e.chip, 0}; break;
      case Category::kL3: key = {1, e.chip, 0}; break;
      case Category::kC2C: key = {2, e.chip, e.peer}; break;
    }
    res[key].emplace_back(e.start, e.end);
  }
  for (auto& [key, iv] : res) {
    std::sort(iv.begin(), iv.end());
    for (std::size_t i = 1; i < iv.size(); ++i) {
      const double tol = 1e-12 * std::max(1.0, std::abs(iv[i].first));
      if (iv[i].first < iv[i - 1].second - tol) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

std::string_view to_string(PrefetchModel p) {
  switch (p) {
    case PrefetchModel::kHideResident: return "hide-resident";
    case PrefetchModel::kStrictSteadyState: return "strict";
  }
  return "?";
}

std::optional<PrefetchModel> parse_prefetch_model(std::string_view s) {
  if (s == "hide-resident") return PrefetchModel::kHideResident;
  if (s == "strict") return PrefetchModel::kStrictSteadyState;
  return std::nullopt;
}

std::int64_t stream_passes(const KernelDesc& k, std::int64_t bytes_per_elem,
                           const ChipSpec& chip) {
  const std::int64_t panel_budget = chip.l1_bytes / 4;
  const std::int64_t row_bytes = std::max<std::int64_t>(1, k.k * bytes_per_elem);
  const std::int64_t rows = std::max<std::int64_t>(1, panel_budget / row_bytes);
  return (k.m + rows - 1) / rows;
}

namespace {

struct Step {
  KernelDesc kernel;
  std::optional<WeightTensor> weight;
  std::vector<std::pair<ActivationKind, std::int64_t>> reads;
  std::vector<std::pair<ActivationKind, std::int64_t>> writes;
};

// The two phases of one chip's block: MHSA up to the first sync, FC up to the second.
std::array<std::vector<Step>, 2> chip_program(const ModelConfig& cfg, const PartitionPlan& plan,
                                              int chip) {
  using AK = ActivationKind;
  const auto b = cfg.bytes_per_elem;
  const auto q = cfg.query_len();
  const auto kv = cfg.attended_len();
  const auto e = cfg.embed_dim;
  const auto p = cfg.head_dim;
  const auto local_proj = plan.shard(chip, WeightTensor::kQuery).cols.size();
  const auto heads = local_proj / p;
  const auto local_f = plan.shard(chip, WeightTensor::kFc1).cols.size();
  const bool ar = cfg.mode == Mode::kAutoregressive;

  std::array<std::vector<Step>, 2> prog;
  auto& mhsa = prog[0];
  auto& fc = prog[1];

  const char* proj_names[] = {"q_proj", "k_proj", "v_proj"};
  const WeightTensor proj_w[] = {WeightTensor::kQuery, WeightTensor::kKey, WeightTensor::kValue};
  for (int i = 0; i < 3; ++i) {
    mhsa.push_back({KernelDesc::matmul(q, local_proj, e, b, proj_names[i]), proj_w[i],
                    {{AK::kInput, q * e * b}}, {{AK::kQkv, q * local_proj * b}}});
  }
  if (ar) {
    mhsa.push_back({KernelDesc::rowwise(KernelKind::kElementwise, q, 2 * local_proj, b, "kv_append"),
                    std::nullopt,
                    {{AK::kQkv, 2 * q * local_proj * b}},
                    {{AK::kKvCache, 2 * q * local_proj * b}}});
  }
  // K and V come from the cache when decoding, from the fresh projections otherwise.
  const AK kv_src = ar ? AK::kKvCache : AK::kQkv;
  for (std::int64_t h = 0; h < heads; ++h) {
    const auto tag = fmt::format("head{}", h);
    mhsa.push_back({KernelDesc::matmul(q, kv, p, b, tag + "/scores"), std::nullopt,
                    {{AK::kQkv, q * p * b}, {kv_src, kv * p * b}},
                    {{AK::kScores, q * kv * b}}});
    mhsa.push_back({KernelDesc::rowwise(KernelKind::kSoftmax, q, kv, b, tag + "/softmax"),
                    std::nullopt,
                    {{AK::kScores, q * kv * b}},
                    {{AK::kScores, q * kv * b}}});
    mhsa.push_back({KernelDesc::matmul(q, p, kv, b, tag + "/context"), std::nullopt,
                    {{AK::kScores, q * kv * b}, {kv_src, kv * p * b}},
                    {{AK::kContext, q * p * b}}});
  }
  mhsa.push_back({KernelDesc::matmul(q, e, local_proj, b, "out_proj"), WeightTensor::kOut,
                  {{AK::kContext, q * local_proj * b}}, {{AK::kPartial, q * e * b}}});

  fc.push_back({KernelDesc::matmul(q, local_f, e, b, "fc1"), WeightTensor::kFc1,
                {{AK::kInput, q * e * b}}, {{AK::kFcHidden, q * local_f * b}}});
  fc.push_back({KernelDesc::rowwise(KernelKind::kGelu, q, local_f, b, "gelu"), std::nullopt,
                {{AK::kFcHidden, q * local_f * b}}, {{AK::kFcHidden, q * local_f * b}}});
  fc.push_back({KernelDesc::matmul(q, e, local_f, b, "fc2"), WeightTensor::kFc2,
                {{AK::kFcHidden, q * local_f * b}}, {{AK::kPartial, q * e * b}}});
  return prog;
}

class Simulator {
 public:
  Simulator(const ModelConfig& cfg, const PartitionPlan& plan, const ResidencyPlan& res,
            const Platform& pf)
      : cfg_(cfg),
        plan_(plan),
        res_(res),
        pf_(pf),
        tl_(plan.n_chips),
        t_(plan.n_chips, 0.0),
        l3_free_(plan.n_chips, 0.0),
        link_free_() {}

  Timeline run() {
    const int n = plan_.n_chips;
    const bool strict = pf_.options.prefetch == PrefetchModel::kStrictSteadyState;
    std::vector<std::array<std::vector<Step>, 2>> programs;
    programs.reserve(n);
    for (int c = 0; c < n; ++c) programs.push_back(chip_program(cfg_, plan_, c));

    if (strict && res_.double_buffer) {
      // Next block's shards stream in while this block runs.
      for (int c = 0; c < n; ++c) {
        for (auto t : kWeightTensors) {
          l3(c, weight_bytes(c, t), fmt::format("prefetch/{}", to_string(t)), 0.0, false);
        }
      }
    }

    for (std::size_t phase = 0; phase < 2; ++phase) {
      for (int c = 0; c < n; ++c) {
        for (const auto& step : programs[c][phase]) run_step(c, step);
      }
      collective(plan_.schedule.syncs.at(phase));
    }

    if (!strict && !res_.all_blocks_resident) {
      // Resident shards of the next block load after this block's own L3 traffic.
      for (int c = 0; c < n; ++c) {
        for (auto t : kWeightTensors) {
          if (res_.home(t) == Home::kL2Resident) {
            l3(c, weight_bytes(c, t), fmt::format("prefetch/{}", to_string(t)), 0.0, true);
          }
        }
      }
    }
    return std::move(tl_);
  }

 private:
  std::int64_t weight_bytes(int chip, WeightTensor t) const {
    return plan_.shard(chip, t).elements() * cfg_.bytes_per_elem;
  }

  double l3(int chip, std::int64_t bytes, std::string label, double ready, bool background) {
    if (bytes <= 0) return ready;
    Event e;
    e.category = Category::kL3;
    e.chip = chip;
    e.start = std::max(ready, l3_free_[chip]);
    e.end = e.start + static_cast<double>(bytes) / pf_.chip.l3_bandwidth;
    e.bytes = bytes;
    e.label = std::move(label);
    e.background = background;
    l3_free_[chip] = e.end;
    const double end = e.end;
    tl_.add(std::move(e));
    return end;
  }

  // Runs a kernel on `chip` no earlier than its clock; advances the clock.
  void compute(int chip, const KernelDesc& k) {
    const std::int64_t traffic = k.bytes_in + k.bytes_out;
    if (pf_.options.charge_l2_time) {
      Event l2;
      l2.category = Category::kL2;
      l2.chip = chip;
      l2.start = t_[chip];
      l2.end = l2.start + static_cast<double>(traffic) / pf_.chip.l2_l1_bytes_per_second();
      l2.bytes = traffic;
      l2.label = k.label + "/l1";
      t_[chip] = l2.end;
      tl_.add(std::move(l2));
    }
    Event e;
    e.category = Category::kCompute;
    e.chip = chip;
    e.start = t_[chip];
    e.end = e.start +
            static_cast<double>(kernel_cycles(k, pf_.chip, pf_.efficiency)) / pf_.chip.clock_hz;
    e.bytes = pf_.options.charge_l2_time ? 0 : traffic;
    e.macs = k.macs();
    e.label = k.label;
    t_[chip] = e.end;
    tl_.add(std::move(e));
  }

  void run_step(int chip, const Step& s) {
    const bool strict = pf_.options.prefetch == PrefetchModel::kStrictSteadyState;
    if (s.weight) {
      const auto t = *s.weight;
      const bool streamed = res_.home(t) == Home::kL3Streamed;
      const bool load_first = strict && !res_.double_buffer && !res_.all_blocks_resident;
      if (streamed) {
        const auto passes = stream_passes(s.kernel, cfg_.bytes_per_elem, pf_.chip);
        t_[chip] = l3(chip, weight_bytes(chip, t) * passes, std::string(to_string(t)), t_[chip],
                      false);
      } else if (load_first) {
        t_[chip] = l3(chip, weight_bytes(chip, t), std::string(to_string(t)), t_[chip], false);
      }
    }
    for (const auto& [kind, bytes] : s.reads) {
      if (res_.is_spilled(kind)) {
        t_[chip] = l3(chip, bytes, fmt::format("spill/{}", to_string(kind)), t_[chip], false);
      }
    }
    compute(chip, s.kernel);
    for (const auto& [kind, bytes] : s.writes) {
      if (res_.is_spilled(kind)) {
        t_[chip] = l3(chip, bytes, fmt::format("spill/{}", to_string(kind)), t_[chip], false);
      }
    }
  }

  double send(const Message& m, double ready) {
    double& free = link_free_[{m.src, m.dst}];
    Event e;
    e.category = Category::kC2C;
    e.chip = m.src;
    e.peer = m.dst;
    e.start = std::max(ready, free);
    e.end = e.start + static_cast<double>(m.bytes) / pf_.link.bandwidth + pf_.link.latency;
    e.bytes = m.bytes;
    e.label = m.label;
    free = e.end;
    const double end = e.end;
    tl_.add(std::move(e));
    return end;
  }

  void collective(const SyncPoint& sync) {
    const auto q = cfg_.query_len();
    const auto e = cfg_.embed_dim;
    const auto b = cfg_.bytes_per_elem;
    const int root = sync.norm_chip;
    const auto& levels = plan_.tree.levels;

    // Reduce messages grouped by level, then sender.
    std::map<int, std::vector<const Message*>> up, down;
    for (const auto& m : sync.reduce) up[m.level].push_back(&m);
    for (const auto& m : sync.broadcast) down[m.level].push_back(&m);

    compute(root, KernelDesc::rowwise(KernelKind::kElementwise, q, e, b, sync.label + "/skip"));

    double barrier = 0.0;
    for (std::size_t lvl = 0; lvl < levels.size(); ++lvl) {
      double level_end = barrier;
      for (const Message* m : up[static_cast<int>(lvl)]) {
        const double arrive = send(*m, std::max(t_[m->src], barrier));
        t_[m->src] = arrive;
        t_[m->dst] = std::max(t_[m->dst], arrive);
        compute(m->dst,
                KernelDesc::rowwise(KernelKind::kElementwise, q, e, b, sync.label + "/reduce"));
        level_end = std::max(level_end, t_[m->dst]);
      }
      barrier = level_end;
    }

    t_[root] = std::max(t_[root], barrier);
    compute(root, KernelDesc::rowwise(KernelKind::kNorm, q, e, b, sync.label + "/norm"));
    barrier = t_[root];

    for (auto it = down.begin(); it != down.end(); ++it) {
      double level_end = barrier;
      for (const Message* m : it->second) {
        const double arrive = send(*m, std::max(t_[m->src], barrier));
        t_[m->dst] = std::max(t_[m->dst], arrive);
        level_end = std::max(level_end, arrive);
      }
      barrier = level_end;
    }
    // Every chip resumes with the normalized activations in hand.
    for (auto& t : t_) t = std::max(t, barrier);
  }

  const ModelConfig& cfg_;
  const PartitionPlan& plan_;
  const ResidencyPlan& res_;
  const Platform& pf_;
  Timeline tl_;
  std::vector<double> t_;
  std::vector<double> l3_free_;
  std::map<std::pair<int, int>, double> link_free_;
};

}  // namespace

Timeline simulate_block(const ModelConfig& cfg, const PartitionPlan& plan,
                        const ResidencyPlan& residency, const Platform& platform) {
  if (!(plan.config == cfg)) {
    throw Error(ErrorCode::kInconsistentPlan, "plan was built for a different config");
  }
  auto v = verify_plan(plan, cfg);
  if (!v.ok()) throw Error(ErrorCode::kInconsistentPlan, v.violations.front());
  if (residency.n_chips != plan.n_chips) {
    throw Error(ErrorCode::kInconsistentPlan,
                fmt::format("residency for {} chips, plan for {}", residency.n_chips,
                            plan.n_chips));
  }
  for (auto t : kWeightTensors) {
    const auto bytes = plan.shard(plan.tree.root, t).elements() * cfg.bytes_per_elem;
    if (residency.shard_bytes[tensor_index(t)] != bytes) {
      throw Error(ErrorCode::kInconsistentPlan,
                  fmt::format("residency shard size for {} does not match plan", to_string(t)));
    }
  }
  if (plan.schedule.syncs.size() != 2) {
    throw Error(ErrorCode::kInconsistentPlan, "schedule needs exactly two syncs");
  }
  auto chip_ok = validate(platform.chip);
  chip_ok.merge(validate(platform.link));
  if (!chip_ok.ok()) throw Error(ErrorCode::kInvalidConfig, chip_ok.violations.front());

  Simulator sim(cfg, plan, residency, platform);
  return sim.run();
}

std::vector<SweepPoint> sweep(const ModelConfig& cfg, const std::vector<int>& n_chips_list,
                              const Platform& platform) {
  std::vector<int> ns = n_chips_list;
  const bool has_one = std::find(ns.begin(), ns.end(), 1) != ns.end();
  if (!has_one) ns.push_back(1);

  std::vector<SweepPoint> points(ns.size());
  const auto count = static_cast<std::int64_t>(ns.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < count; ++i) {
    SweepPoint& pt = points[i];
    pt.n_chips = ns[i];
    try {
      if (ns[i] < 1) throw Error(ErrorCode::kInvalidConfig, "chip count must be >= 1");
      const auto plan = plan_partition(cfg, ns[i], platform.fan_in);
      pt.residency = plan_residency(cfg, plan, platform.chip);
      pt.timeline = simulate_block(cfg, plan, pt.residency, platform);
      pt.makespan = pt.timeline->makespan();
      pt.breakdown = pt.timeline->breakdown(plan.tree.root);
      pt.ok = true;
    } catch (const std::exception& ex) {
      pt.ok = false;
      pt.error = ex.what();
    }
  }

  const auto base = std::find_if(points.begin(), points.end(),
                                 [](const SweepPoint& p) { return p.n_chips == 1; });
  for (auto& p : points) {
    if (p.ok && base->ok && p.makespan > 0) p.speedup = base->makespan / p.makespan;
  }
  if (!has_one) points.pop_back();
  return points;
}

}  // namespace tpsim
