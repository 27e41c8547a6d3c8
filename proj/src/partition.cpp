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

#include "tpsim/partition.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>

namespace tpsim {

std::string_view to_string(WeightTensor t) {
  switch (t) {
    case WeightTensor::kQuery: return "W_query";
    case WeightTensor::kKey: return "W_key";
    case WeightTensor::kValue: return "W_value";
    case WeightTensor::kOut: return "W_O";
    case WeightTensor::kFc1: return "W_L1";
    case WeightTensor::kFc2: return "W_L2";
  }
  return "?";
}

std::optional<WeightTensor> parse_weight_tensor(std::string_view s) {
  for (auto t : kWeightTensors) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

TensorShape tensor_shape(const ModelConfig& cfg, WeightTensor t) {
  switch (t) {
    case WeightTensor::kQuery:
    case WeightTensor::kKey:
    case WeightTensor::kValue: return {cfg.embed_dim, cfg.proj_dim()};
    case WeightTensor::kOut: return {cfg.proj_dim(), cfg.embed_dim};
    case WeightTensor::kFc1: return {cfg.embed_dim, cfg.intermediate_dim};
    case WeightTensor::kFc2: return {cfg.intermediate_dim, cfg.embed_dim};
  }
  return {};
}

Axis sliced_axis(WeightTensor t) {
  return (t == WeightTensor::kOut || t == WeightTensor::kFc2) ? Axis::kRows : Axis::kCols;
}

std::size_t ReduceTree::message_count() const {
  std::size_t n = 0;
  for (const auto& level : levels) {
    for (const auto& g : level) n += g.senders.size();
  }
  return n;
}

const ShardSpec& PartitionPlan::shard(int chip, WeightTensor t) const {
  for (const auto& s : shards) {
    if (s.chip == chip && s.tensor == t) return s;
  }
  throw Error(ErrorCode::kPlanMismatch,
              fmt::format("chip {} holds no shard of {}", chip, to_string(t)));
}

ReduceTree build_reduce_tree(int n_chips, int fan_in) {
  if (n_chips < 1 || fan_in < 2) {
    throw Error(ErrorCode::kInvalidConfig,
                fmt::format("reduce tree needs n_chips >= 1 and fan_in >= 2 (got {}, {})",
                            n_chips, fan_in));
  }
  ReduceTree tree;
  tree.n_chips = n_chips;
  tree.fan_in = fan_in;
  tree.root = 0;

  std::vector<int> active(static_cast<std::size_t>(n_chips));
  for (int i = 0; i < n_chips; ++i) active[static_cast<std::size_t>(i)] = i;

  while (active.size() > 1) {
    std::vector<ReduceGroup> level;
    std::vector<int> next;
    for (std::size_t i = 0; i < active.size(); i += static_cast<std::size_t>(fan_in)) {
      ReduceGroup g;
      g.receiver = active[i];
      const std::size_t end = std::min(active.size(), i + static_cast<std::size_t>(fan_in));
      for (std::size_t j = i + 1; j < end; ++j) g.senders.push_back(active[j]);
      next.push_back(g.receiver);
      level.push_back(std::move(g));
    }
    tree.levels.push_back(std::move(level));
    active = std::move(next);
  }
  return tree;
}

namespace {

SyncPoint make_sync(const ReduceTree& tree, std::string label, std::int64_t bytes) {
  SyncPoint sync;
  sync.label = std::move(label);
  sync.norm_chip = tree.root;
  for (std::size_t l = 0; l < tree.levels.size(); ++l) {
    for (const auto& g : tree.levels[l]) {
      for (int s : g.senders) {
        sync.reduce.push_back({s, g.receiver, bytes, sync.label + "/partial", static_cast<int>(l)});
      }
    }
  }
  // Broadcast walks the same tree top-down.
  for (std::size_t l = tree.levels.size(); l-- > 0;) {
    for (const auto& g : tree.levels[l]) {
      for (int s : g.senders) {
        sync.broadcast.push_back({g.receiver, s, bytes, sync.label + "/normalized", static_cast<int>(l)});
      }
    }
  }
  return sync;
}

}  // namespace

PartitionPlan plan_partition(const ModelConfig& cfg, int n_chips, int fan_in) {
  if (const auto v = validate(cfg); !v.ok()) {
    throw Error(ErrorCode::kInvalidConfig, v.violations.front());
  }
  if (n_chips < 1) {
    throw Error(ErrorCode::kInvalidConfig, fmt::format("n_chips must be >= 1 (got {})", n_chips));
  }
  if (cfg.num_heads % n_chips != 0) {
    throw Error(ErrorCode::kIndivisibleHeads,
                fmt::format("{} heads over {} chips", cfg.num_heads, n_chips));
  }
  if (cfg.intermediate_dim % n_chips != 0) {
    throw Error(ErrorCode::kIndivisibleIntermediate,
                fmt::format("F={} over {} chips", cfg.intermediate_dim, n_chips));
  }

  PartitionPlan plan;
  plan.config = cfg;
  plan.n_chips = n_chips;

  const std::int64_t heads_per_chip = cfg.num_heads / n_chips;
  const std::int64_t proj_per_chip = heads_per_chip * cfg.head_dim;
  const std::int64_t f_per_chip = cfg.intermediate_dim / n_chips;
  const std::int64_t e = cfg.embed_dim;

  for (int c = 0; c < n_chips; ++c) {
    const Range heads_cols{c * proj_per_chip, (c + 1) * proj_per_chip};
    const Range f_range{c * f_per_chip, (c + 1) * f_per_chip};
    std::int64_t elems = 0;
    for (auto t : kWeightTensors) {
      ShardSpec s;
      s.chip = c;
      s.tensor = t;
      switch (t) {
        case WeightTensor::kQuery:
        case WeightTensor::kKey:
        case WeightTensor::kValue: s.rows = {0, e}; s.cols = heads_cols; break;
        case WeightTensor::kOut: s.rows = heads_cols; s.cols = {0, e}; break;
        case WeightTensor::kFc1: s.rows = {0, e}; s.cols = f_range; break;
        case WeightTensor::kFc2: s.rows = f_range; s.cols = {0, e}; break;
      }
      elems += s.elements();
      plan.shards.push_back(s);
    }
    plan.chip_weight_bytes.push_back(elems * cfg.bytes_per_elem);
  }

  plan.tree = build_reduce_tree(n_chips, fan_in);
  const std::int64_t msg_bytes = cfg.query_len() * e * cfg.bytes_per_elem;
  plan.schedule.syncs.push_back(make_sync(plan.tree, "mhsa", msg_bytes));
  plan.schedule.syncs.push_back(make_sync(plan.tree, "fc", msg_bytes));
  return plan;
}

std::int64_t comm_bytes_per_block(const PartitionPlan& plan, const ModelConfig& cfg) {
  return 2 * 2 * static_cast<std::int64_t>(plan.n_chips - 1) * cfg.query_len() * cfg.embed_dim *
         cfg.bytes_per_elem;
}

namespace {

void check_tensor_cover(const PartitionPlan& plan, const ModelConfig& cfg, WeightTensor t,
                        ValidationResult& r) {
  const TensorShape shape = tensor_shape(cfg, t);
  const Axis axis = sliced_axis(t);
  const std::int64_t full_sliced = axis == Axis::kRows ? shape.rows : shape.cols;
  const std::int64_t full_other = axis == Axis::kRows ? shape.cols : shape.rows;
  const bool head_aligned = t != WeightTensor::kFc1 && t != WeightTensor::kFc2;

  std::vector<const ShardSpec*> shards;
  for (const auto& s : plan.shards) {
    if (s.tensor == t) shards.push_back(&s);
  }
  for (const auto* s : shards) {
    const Range& other = axis == Axis::kRows ? s->cols : s->rows;
    const Range& sl = s->sliced();
    if (sl.empty() || other.empty()) {
      r.violations.push_back(fmt::format("empty shard: {} on chip {}", to_string(t), s->chip));
    }
    if (sl.begin < 0 || sl.end > full_sliced || other.begin < 0 || other.end > full_other) {
      r.violations.push_back(fmt::format("out of bounds: {} on chip {}", to_string(t), s->chip));
    }
    if (other.begin != 0 || other.end != full_other) {
      r.violations.push_back(
          fmt::format("partial unsliced axis: {} on chip {}", to_string(t), s->chip));
    }
    if (head_aligned && (sl.begin % cfg.head_dim != 0 || sl.end % cfg.head_dim != 0)) {
      r.violations.push_back(
          fmt::format("head split: {} on chip {} cuts a head", to_string(t), s->chip));
    }
  }

  std::sort(shards.begin(), shards.end(), [](const ShardSpec* a, const ShardSpec* b) {
    return a->sliced().begin < b->sliced().begin;
  });
  std::int64_t covered_to = 0;
  for (const auto* s : shards) {
    const Range& sl = s->sliced();
    if (sl.begin < covered_to) {
      r.violations.push_back(fmt::format("duplication: {} [{}, {}) on chip {} overlaps", to_string(t),
                                         sl.begin, std::min(covered_to, sl.end), s->chip));
    } else if (sl.begin > covered_to) {
      r.violations.push_back(
          fmt::format("coverage gap: {} [{}, {})", to_string(t), covered_to, sl.begin));
    }
    covered_to = std::max(covered_to, sl.end);
  }
  if (covered_to < full_sliced) {
    r.violations.push_back(
        fmt::format("coverage gap: {} [{}, {})", to_string(t), covered_to, full_sliced));
  }
}

}  // namespace

ValidationResult verify_plan(const PartitionPlan& plan, const ModelConfig& cfg) {
  ValidationResult r;
  if (plan.n_chips < 1) {
    r.violations.emplace_back("n_chips >= 1");
    return r;
  }
  const auto& pc = plan.config;
  if (pc.embed_dim != cfg.embed_dim || pc.proj_dim() != cfg.proj_dim() ||
      pc.head_dim != cfg.head_dim || pc.intermediate_dim != cfg.intermediate_dim ||
      pc.bytes_per_elem != cfg.bytes_per_elem || pc.query_len() != cfg.query_len()) {
    r.violations.emplace_back("config mismatch: plan was built for different dimensions");
    return r;
  }

  for (auto t : kWeightTensors) check_tensor_cover(plan, cfg, t, r);

  // Per-chip holdings, FC range pairing and even split.
  std::map<int, std::int64_t> elems;
  std::map<int, std::set<WeightTensor>> held;
  for (const auto& s : plan.shards) {
    if (s.chip < 0 || s.chip >= plan.n_chips) {
      r.violations.push_back(fmt::format("unknown chip {} in shard list", s.chip));
      continue;
    }
    elems[s.chip] += s.elements();
    held[s.chip].insert(s.tensor);
  }
  for (int c = 0; c < plan.n_chips; ++c) {
    if (held[c].size() != kWeightTensors.size()) {
      r.violations.push_back(fmt::format("missing shard: chip {} holds {} of 6 tensors", c,
                                         held[c].size()));
      continue;
    }
    if (plan.shard(c, WeightTensor::kFc1).cols != plan.shard(c, WeightTensor::kFc2).rows) {
      r.violations.push_back(fmt::format("fc range mismatch on chip {}", c));
    }
  }
  std::set<std::int64_t> distinct;
  for (const auto& [chip, n] : elems) distinct.insert(n);
  if (distinct.size() > 1) r.violations.emplace_back("uneven split: per-chip weight bytes differ");
  if (plan.chip_weight_bytes.size() != static_cast<std::size_t>(plan.n_chips)) {
    r.violations.emplace_back("chip_weight_bytes size != n_chips");
  } else {
    for (int c = 0; c < plan.n_chips; ++c) {
      if (plan.chip_weight_bytes[static_cast<std::size_t>(c)] != elems[c] * cfg.bytes_per_elem) {
        r.violations.push_back(fmt::format("chip_weight_bytes mismatch on chip {}", c));
      }
    }
  }

  // Reduce tree: every non-root chip sends exactly once, groups bounded by fan_in.
  std::vector<int> sends(static_cast<std::size_t>(plan.n_chips), 0);
  for (const auto& level : plan.tree.levels) {
    for (const auto& g : level) {
      if (static_cast<int>(g.senders.size()) + 1 > plan.tree.fan_in) {
        r.violations.push_back(fmt::format("tree: group at chip {} exceeds fan_in", g.receiver));
      }
      for (int s : g.senders) {
        if (s >= 0 && s < plan.n_chips) ++sends[static_cast<std::size_t>(s)];
      }
    }
  }
  for (int c = 0; c < plan.n_chips; ++c) {
    const int expected = (c == plan.tree.root) ? 0 : 1;
    if (sends[static_cast<std::size_t>(c)] != expected) {
      r.violations.push_back(fmt::format("tree: chip {} sends {} times", c,
                                         sends[static_cast<std::size_t>(c)]));
    }
  }

  // Two syncs, n-1 messages per phase, fixed message size.
  if (plan.schedule.syncs.size() != 2) {
    r.violations.push_back(fmt::format("sync count: expected 2, got {}", plan.schedule.syncs.size()));
  }
  const std::int64_t msg_bytes = cfg.query_len() * cfg.embed_dim * cfg.bytes_per_elem;
  const std::size_t expected_msgs = static_cast<std::size_t>(plan.n_chips - 1);
  for (const auto& sync : plan.schedule.syncs) {
    if (sync.reduce.size() != expected_msgs || sync.broadcast.size() != expected_msgs) {
      r.violations.push_back(fmt::format("message count: sync '{}' has {}/{} messages, expected {}",
                                         sync.label, sync.reduce.size(), sync.broadcast.size(),
                                         expected_msgs));
    }
    for (const auto* phase : {&sync.reduce, &sync.broadcast}) {
      for (const auto& m : *phase) {
        if (m.bytes != msg_bytes) {
          r.violations.push_back(fmt::format("message bytes: {} -> {} carries {} bytes, expected {}",
                                             m.src, m.dst, m.bytes, msg_bytes));
        }
      }
    }
  }
  return r;
}

}  // namespace tpsim
