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

#include "tpsim/model.hpp"

namespace tpsim {

enum class WeightTensor { kQuery, kKey, kValue, kOut, kFc1, kFc2 };

inline constexpr std::array<WeightTensor, 6> kWeightTensors = {
    WeightTensor::kQuery, WeightTensor::kKey, WeightTensor::kValue,
    WeightTensor::kOut,   WeightTensor::kFc1, WeightTensor::kFc2};

std::string_view to_string(WeightTensor t);
std::optional<WeightTensor> parse_weight_tensor(std::string_view s);

enum class Axis { kRows, kCols };

/// Half-open index interval [begin, end).
struct Range {
  std::int64_t begin = 0;
  std::int64_t end = 0;

  std::int64_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool operator==(const Range&) const = default;
};

struct TensorShape {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
};

TensorShape tensor_shape(const ModelConfig& cfg, WeightTensor t);
/// Axis along which a tensor is sliced: output columns for W_query, W_key,
/// W_value and W_L1; input rows for W_O and W_L2.
Axis sliced_axis(WeightTensor t);

struct ShardSpec {
  int chip = 0;
  WeightTensor tensor = WeightTensor::kQuery;
  Range rows;
  Range cols;

  const Range& sliced() const { return sliced_axis(tensor) == Axis::kRows ? rows : cols; }
  std::int64_t elements() const { return rows.size() * cols.size(); }
  bool operator==(const ShardSpec&) const = default;
};

struct ReduceGroup {
  int receiver = 0;
  std::vector<int> senders;
  bool operator==(const ReduceGroup&) const = default;
};

/// Hierarchical reduction in groups of at most `fan_in` chips. levels[0] is
/// the leaf level; the receivers of one level are the participants of the next.
struct ReduceTree {
  int n_chips = 1;
  int fan_in = 4;
  int root = 0;
  std::vector<std::vector<ReduceGroup>> levels;

  std::size_t message_count() const;
  bool operator==(const ReduceTree&) const = default;
};

struct Message {
  int src = 0;
  int dst = 0;
  std::int64_t bytes = 0;
  std::string label;
  int level = 0;
  bool operator==(const Message&) const = default;
};

struct SyncPoint {
  std::string label;
  std::vector<Message> reduce;
  int norm_chip = 0;
  std::vector<Message> broadcast;
  bool operator==(const SyncPoint&) const = default;
};

struct CommSchedule {
  std::vector<SyncPoint> syncs;
  bool operator==(const CommSchedule&) const = default;
};

struct PartitionPlan {
  ModelConfig config;
  int n_chips = 1;
  std::vector<ShardSpec> shards;  // chip-major, kWeightTensors order within a chip
  ReduceTree tree;
  CommSchedule schedule;
  std::vector<std::int64_t> chip_weight_bytes;

  /// First shard of `t` held by `chip`; throws Error(kPlanMismatch) if absent.
  const ShardSpec& shard(int chip, WeightTensor t) const;
  bool operator==(const PartitionPlan&) const = default;
};

ReduceTree build_reduce_tree(int n_chips, int fan_in = 4);

/// Head-dimension sharding of the attention weights and F-dimension sharding
/// of the FC weights over `n_chips`, plus the two-sync schedule.
/// Throws kInvalidConfig, kIndivisibleHeads or kIndivisibleIntermediate.
PartitionPlan plan_partition(const ModelConfig& cfg, int n_chips, int fan_in = 4);

/// Closed form: 2 syncs x 2 phases x (n - 1) messages x query_len*E*b.
std::int64_t comm_bytes_per_block(const PartitionPlan& plan, const ModelConfig& cfg);

/// Checks bounds, disjointness ("duplication"), coverage, even split, tree
/// shape and the two-sync schedule.
ValidationResult verify_plan(const PartitionPlan& plan, const ModelConfig& cfg);

}  // namespace tpsim
