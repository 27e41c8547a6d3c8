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
#include <span>
#include <string>
#include <vector>

#include "tpsim/matrix.hpp"
#include "tpsim/model.hpp"
#include "tpsim/partition.hpp"

namespace tpsim {

struct BlockWeights {
  Matrix w_query;  // E x P*H
  Matrix w_key;    // E x P*H
  Matrix w_value;  // E x P*H
  Matrix w_out;    // P*H x E
  Matrix w_fc1;    // E x F
  Matrix w_fc2;    // F x E
  std::vector<double> norm1_gain;  // E
  std::vector<double> norm2_gain;  // E

  const Matrix& tensor(WeightTensor t) const;
  std::int64_t param_count() const;
};

/// Weights drawn from a seeded N(0, 1/fan_in); norm gains near 1.
BlockWeights random_block_weights(const ModelConfig& cfg, std::uint64_t seed);
/// All matrices zero, unit norm gains.
BlockWeights zero_block_weights(const ModelConfig& cfg);
Matrix random_matrix(std::int64_t rows, std::int64_t cols, std::uint64_t seed, double scale = 1.0);

/// Append-only key/value store for a contiguous run of heads.
class KVCache {
 public:
  KVCache(std::int64_t head_dim, std::int64_t num_heads, std::int64_t capacity,
          std::int64_t first_head = 0);

  std::int64_t head_dim() const { return head_dim_; }
  std::int64_t num_heads() const { return num_heads_; }
  std::int64_t first_head() const { return first_head_; }
  std::int64_t capacity() const { return capacity_; }
  std::int64_t filled() const { return filled_; }

  /// Appends rows for every held head. `k_rows` and `v_rows` are
  /// rows x (num_heads * head_dim). Throws kCacheFull or kShapeMismatch.
  void append(const Matrix& k_rows, const Matrix& v_rows);
  /// filled x head_dim view of one held head (local index).
  Matrix keys(std::int64_t local_head) const;
  Matrix values(std::int64_t local_head) const;
  /// Copy of heads [first_local, first_local + count) with the same fill level.
  KVCache slice(std::int64_t first_local, std::int64_t count) const;
  /// Allocated bytes at `bytes_per_elem`.
  std::int64_t bytes(std::int64_t bytes_per_elem) const;

 private:
  std::int64_t head_dim_;
  std::int64_t num_heads_;
  std::int64_t capacity_;
  std::int64_t first_head_;
  std::int64_t filled_ = 0;
  std::vector<Matrix> keys_;
  std::vector<Matrix> values_;
};

/// Weights materialized on one chip according to a plan.
struct ChipState {
  int chip_id = 0;
  Range heads;    // global head indices
  Range f_range;  // intermediate columns
  Matrix w_query, w_key, w_value, w_out, w_fc1, w_fc2;
  std::vector<double> norm1_gain, norm2_gain;  // populated on the normalization chip only

  static ChipState materialize(const PartitionPlan& plan, const BlockWeights& w, int chip);
  std::int64_t weight_elements() const;
};

/// softmax(q k^T / sqrt(scale_dim)) v. Queries are the trailing positions of
/// the key sequence, so with causal masking query row i sees keys
/// [0, k.rows() - q.rows() + i]. Throws kShapeMismatch.
Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, std::int64_t scale_dim,
                 bool causal);

/// One post-norm Transformer block on a single device. With a cache, the new
/// keys/values are appended first and attention spans every cached position.
Matrix run_block_monolithic(const Matrix& x, const BlockWeights& w, const ModelConfig& cfg,
                            KVCache* cache = nullptr);

struct ExecTrace {
  std::vector<Message> messages;  // in execution order, labels as in CommSchedule
  std::vector<std::int64_t> chip_weight_bytes;
};

/// Tensor-parallel execution of one block under `plan`. `caches` is empty or
/// holds one cache per chip covering exactly that chip's heads.
/// Throws kPlanMismatch besides the monolithic errors.
Matrix run_block_partitioned(const Matrix& x, const PartitionPlan& plan, const BlockWeights& w,
                             const ModelConfig& cfg, std::span<KVCache> caches = {},
                             ExecTrace* trace = nullptr);

/// Splits a full-model cache into per-chip caches following `plan`.
std::vector<KVCache> split_cache(const KVCache& full, const PartitionPlan& plan);

}  // namespace tpsim
