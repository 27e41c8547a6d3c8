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

#include "tpsim/exec.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "tpsim/kernels.hpp"

namespace tpsim {

const Matrix& BlockWeights::tensor(WeightTensor t) const {
  switch (t) {
    case WeightTensor::kQuery: return w_query;
    case WeightTensor::kKey: return w_key;
    case WeightTensor::kValue: return w_value;
    case WeightTensor::kOut: return w_out;
    case WeightTensor::kFc1: return w_fc1;
    case WeightTensor::kFc2: return w_fc2;
  }
  return w_query;
}

std::int64_t BlockWeights::param_count() const {
  std::int64_t n = static_cast<std::int64_t>(norm1_gain.size() + norm2_gain.size());
  for (auto t : kWeightTensors) n += tensor(t).size();
  return n;
}

Matrix random_matrix(std::int64_t rows, std::int64_t cols, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

BlockWeights random_block_weights(const ModelConfig& cfg, std::uint64_t seed) {
  const std::int64_t e = cfg.embed_dim;
  const std::int64_t ph = cfg.proj_dim();
  const std::int64_t f = cfg.intermediate_dim;
  auto scaled = [](std::int64_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };
  BlockWeights w;
  w.w_query = random_matrix(e, ph, seed + 1, scaled(e));
  w.w_key = random_matrix(e, ph, seed + 2, scaled(e));
  w.w_value = random_matrix(e, ph, seed + 3, scaled(e));
  w.w_out = random_matrix(ph, e, seed + 4, scaled(ph));
  w.w_fc1 = random_matrix(e, f, seed + 5, scaled(e));
  w.w_fc2 = random_matrix(f, e, seed + 6, scaled(f));
  const Matrix g = random_matrix(2, e, seed + 7, 0.1);
  for (std::int64_t i = 0; i < e; ++i) {
    w.norm1_gain.push_back(1.0 + g(0, i));
    w.norm2_gain.push_back(1.0 + g(1, i));
  }
  return w;
}

BlockWeights zero_block_weights(const ModelConfig& cfg) {
  const std::int64_t e = cfg.embed_dim;
  const std::int64_t ph = cfg.proj_dim();
  const std::int64_t f = cfg.intermediate_dim;
  BlockWeights w;
  w.w_query = Matrix(e, ph);
  w.w_key = Matrix(e, ph);
  w.w_value = Matrix(e, ph);
  w.w_out = Matrix(ph, e);
  w.w_fc1 = Matrix(e, f);
  w.w_fc2 = Matrix(f, e);
  w.norm1_gain.assign(static_cast<std::size_t>(e), 1.0);
  w.norm2_gain.assign(static_cast<std::size_t>(e), 1.0);
  return w;
}

// ---------------------------------------------------------------------------
// KVCache

KVCache::KVCache(std::int64_t head_dim, std::int64_t num_heads, std::int64_t capacity,
                 std::int64_t first_head)
    : head_dim_(head_dim), num_heads_(num_heads), capacity_(capacity), first_head_(first_head) {
  if (head_dim < 1 || num_heads < 1 || capacity < 0 || first_head < 0) {
    throw Error(ErrorCode::kShapeMismatch, "invalid KV-cache geometry");
  }
  keys_.assign(static_cast<std::size_t>(num_heads), Matrix(capacity, head_dim));
  values_.assign(static_cast<std::size_t>(num_heads), Matrix(capacity, head_dim));
}

void KVCache::append(const Matrix& k_rows, const Matrix& v_rows) {
  const std::int64_t width = num_heads_ * head_dim_;
  if (k_rows.cols() != width || v_rows.cols() != width || k_rows.rows() != v_rows.rows()) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("cache append of {}x{} / {}x{} into {} heads of dim {}", k_rows.rows(),
                            k_rows.cols(), v_rows.rows(), v_rows.cols(), num_heads_, head_dim_));
  }
  if (filled_ + k_rows.rows() > capacity_) {
    throw Error(ErrorCode::kCacheFull, fmt::format("{} + {} rows exceeds capacity {}", filled_,
                                                   k_rows.rows(), capacity_));
  }
  for (std::int64_t h = 0; h < num_heads_; ++h) {
    const auto hi = static_cast<std::size_t>(h);
    keys_[hi].set_block(filled_, 0, k_rows.block(0, k_rows.rows(), h * head_dim_, (h + 1) * head_dim_));
    values_[hi].set_block(filled_, 0, v_rows.block(0, v_rows.rows(), h * head_dim_, (h + 1) * head_dim_));
  }
  filled_ += k_rows.rows();
}

Matrix KVCache::keys(std::int64_t local_head) const {
  return keys_.at(static_cast<std::size_t>(local_head)).block(0, filled_, 0, head_dim_);
}

Matrix KVCache::values(std::int64_t local_head) const {
  return values_.at(static_cast<std::size_t>(local_head)).block(0, filled_, 0, head_dim_);
}

KVCache KVCache::slice(std::int64_t first_local, std::int64_t count) const {
  if (first_local < 0 || count < 1 || first_local + count > num_heads_) {
    throw Error(ErrorCode::kShapeMismatch, "cache slice outside held heads");
  }
  KVCache out(head_dim_, count, capacity_, first_head_ + first_local);
  for (std::int64_t h = 0; h < count; ++h) {
    out.keys_[static_cast<std::size_t>(h)] = keys_[static_cast<std::size_t>(first_local + h)];
    out.values_[static_cast<std::size_t>(h)] = values_[static_cast<std::size_t>(first_local + h)];
  }
  out.filled_ = filled_;
  return out;
}

std::int64_t KVCache::bytes(std::int64_t bytes_per_elem) const {
  return 2 * capacity_ * head_dim_ * num_heads_ * bytes_per_elem;
}

// ---------------------------------------------------------------------------
// ChipState

ChipState ChipState::materialize(const PartitionPlan& plan, const BlockWeights& w, int chip) {
  if (chip < 0 || chip >= plan.n_chips) {
    throw Error(ErrorCode::kPlanMismatch, fmt::format("chip {} not in plan", chip));
  }
  auto cut = [&](WeightTensor t) {
    const ShardSpec& s = plan.shard(chip, t);
    const Matrix& full = w.tensor(t);
    if (s.rows.end > full.rows() || s.cols.end > full.cols()) {
      throw Error(ErrorCode::kPlanMismatch,
                  fmt::format("{} shard exceeds weight shape", to_string(t)));
    }
    return full.block(s.rows.begin, s.rows.end, s.cols.begin, s.cols.end);
  };
  ChipState st;
  st.chip_id = chip;
  const ShardSpec& q = plan.shard(chip, WeightTensor::kQuery);
  const std::int64_t p = plan.config.head_dim;
  st.heads = {q.cols.begin / p, q.cols.end / p};
  st.f_range = plan.shard(chip, WeightTensor::kFc1).cols;
  st.w_query = cut(WeightTensor::kQuery);
  st.w_key = cut(WeightTensor::kKey);
  st.w_value = cut(WeightTensor::kValue);
  st.w_out = cut(WeightTensor::kOut);
  st.w_fc1 = cut(WeightTensor::kFc1);
  st.w_fc2 = cut(WeightTensor::kFc2);
  if (chip == plan.tree.root) {
    st.norm1_gain = w.norm1_gain;
    st.norm2_gain = w.norm2_gain;
  }
  return st;
}

std::int64_t ChipState::weight_elements() const {
  return w_query.size() + w_key.size() + w_value.size() + w_out.size() + w_fc1.size() +
         w_fc2.size() + static_cast<std::int64_t>(norm1_gain.size() + norm2_gain.size());
}

// ---------------------------------------------------------------------------
// Attention and block

Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, std::int64_t scale_dim,
                 bool causal) {
  if (scale_dim < 1 || q.cols() != k.cols() || k.rows() != v.rows() ||
      (causal && k.rows() < q.rows())) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("attention Q {}x{}, K {}x{}, V {}x{}, d={}", q.rows(), q.cols(),
                            k.rows(), k.cols(), v.rows(), v.cols(), scale_dim));
  }
  Matrix scores = kernels::matmul_transposed(q, k);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(scale_dim));
  const std::int64_t offset = k.rows() - q.rows();
  for (std::int64_t i = 0; i < scores.rows(); ++i) {
    auto row = scores.row(i);
    const std::int64_t visible = causal ? offset + i + 1 : k.rows();
    for (std::int64_t j = 0; j < visible; ++j) row[static_cast<std::size_t>(j)] *= inv_sqrt_d;
    kernels::softmax_row(row.first(static_cast<std::size_t>(visible)));
    for (std::int64_t j = visible; j < k.rows(); ++j) row[static_cast<std::size_t>(j)] = 0.0;
  }
  return kernels::matmul(scores, v);
}

namespace {

void check_block_inputs(const Matrix& x, const ModelConfig& cfg) {
  if (const auto v = validate(cfg); !v.ok()) {
    throw Error(ErrorCode::kInvalidConfig, v.violations.front());
  }
  if (x.cols() != cfg.embed_dim || x.rows() != cfg.query_len()) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("block input is {}x{}, expected {}x{}", x.rows(), x.cols(),
                            cfg.query_len(), cfg.embed_dim));
  }
}

void check_weights(const BlockWeights& w, const ModelConfig& cfg) {
  for (auto t : kWeightTensors) {
    const TensorShape s = tensor_shape(cfg, t);
    const Matrix& m = w.tensor(t);
    if (m.rows() != s.rows || m.cols() != s.cols) {
      throw Error(ErrorCode::kShapeMismatch,
                  fmt::format("{} is {}x{}, expected {}x{}", to_string(t), m.rows(), m.cols(),
                              s.rows, s.cols));
    }
  }
  if (static_cast<std::int64_t>(w.norm1_gain.size()) != cfg.embed_dim ||
      static_cast<std::int64_t>(w.norm2_gain.size()) != cfg.embed_dim) {
    throw Error(ErrorCode::kShapeMismatch, "norm gain length != embed_dim");
  }
}

/// Attention over `n_heads` consecutive heads whose projections are packed in
/// q/k_new/v_new. Returns rows x (n_heads * P) context.
Matrix attend_heads(const Matrix& q, const Matrix& k_new, const Matrix& v_new,
                    std::int64_t n_heads, std::int64_t head_dim, bool causal, KVCache* cache) {
  if (cache != nullptr) cache->append(k_new, v_new);
  Matrix context(q.rows(), n_heads * head_dim);
  for (std::int64_t h = 0; h < n_heads; ++h) {
    const std::int64_t c0 = h * head_dim;
    const std::int64_t c1 = c0 + head_dim;
    const Matrix qh = q.block(0, q.rows(), c0, c1);
    const Matrix kh = cache ? cache->keys(h) : k_new.block(0, k_new.rows(), c0, c1);
    const Matrix vh = cache ? cache->values(h) : v_new.block(0, v_new.rows(), c0, c1);
    context.set_block(0, c0, attention(qh, kh, vh, head_dim, causal));
  }
  return context;
}

Matrix fc_partial(const Matrix& h, const Matrix& w1, const Matrix& w2, GeluKind gelu) {
  Matrix hidden = kernels::matmul(h, w1);
  kernels::gelu_inplace(hidden, gelu);
  return kernels::matmul(hidden, w2);
}

}  // namespace

Matrix run_block_monolithic(const Matrix& x, const BlockWeights& w, const ModelConfig& cfg,
                            KVCache* cache) {
  check_block_inputs(x, cfg);
  check_weights(w, cfg);
  if (cache != nullptr &&
      (cache->num_heads() != cfg.num_heads || cache->head_dim() != cfg.head_dim)) {
    throw Error(ErrorCode::kShapeMismatch, "cache does not hold every head of the model");
  }

  const Matrix q = kernels::matmul(x, w.w_query);
  const Matrix k = kernels::matmul(x, w.w_key);
  const Matrix v = kernels::matmul(x, w.w_value);
  const Matrix context = attend_heads(q, k, v, cfg.num_heads, cfg.head_dim, cfg.causal, cache);

  Matrix acc = kernels::matmul(context, w.w_out);
  kernels::add_inplace(acc, x);
  kernels::norm_rows(acc, w.norm1_gain, cfg.norm);
  const Matrix h1 = acc;

  Matrix out = fc_partial(h1, w.w_fc1, w.w_fc2, cfg.gelu);
  kernels::add_inplace(out, h1);
  kernels::norm_rows(out, w.norm2_gain, cfg.norm);
  return out;
}

namespace {

/// Tree all-reduce of per-chip partials with the skip merged at the root.
/// Accumulation order: root partial, + skip, then each level's senders in
/// ascending id order. Returns the reduced tensor held by the root.
Matrix tree_reduce(std::vector<Matrix>& partials, const Matrix& skip, const PartitionPlan& plan,
                   const std::string& label, std::int64_t msg_bytes, ExecTrace* trace) {
  kernels::add_inplace(partials[static_cast<std::size_t>(plan.tree.root)], skip);
  for (std::size_t l = 0; l < plan.tree.levels.size(); ++l) {
    for (const auto& g : plan.tree.levels[l]) {
      for (int s : g.senders) {
        kernels::add_inplace(partials[static_cast<std::size_t>(g.receiver)],
                             partials[static_cast<std::size_t>(s)]);
        if (trace) {
          trace->messages.push_back({s, g.receiver, msg_bytes, label + "/partial", static_cast<int>(l)});
        }
      }
    }
  }
  return partials[static_cast<std::size_t>(plan.tree.root)];
}

void trace_broadcast(const PartitionPlan& plan, const std::string& label, std::int64_t msg_bytes,
                     ExecTrace* trace) {
  if (!trace) return;
  for (std::size_t l = plan.tree.levels.size(); l-- > 0;) {
    for (const auto& g : plan.tree.levels[l]) {
      for (int s : g.senders) {
        trace->messages.push_back({g.receiver, s, msg_bytes, label + "/normalized", static_cast<int>(l)});
      }
    }
  }
}

}  // namespace

std::vector<KVCache> split_cache(const KVCache& full, const PartitionPlan& plan) {
  std::vector<KVCache> out;
  const std::int64_t p = plan.config.head_dim;
  for (int c = 0; c < plan.n_chips; ++c) {
    const Range cols = plan.shard(c, WeightTensor::kQuery).cols;
    out.push_back(full.slice(cols.begin / p - full.first_head(), cols.size() / p));
  }
  return out;
}

Matrix run_block_partitioned(const Matrix& x, const PartitionPlan& plan, const BlockWeights& w,
                             const ModelConfig& cfg, std::span<KVCache> caches, ExecTrace* trace) {
  check_block_inputs(x, cfg);
  check_weights(w, cfg);
  if (const auto v = verify_plan(plan, cfg); !v.ok()) {
    throw Error(ErrorCode::kPlanMismatch, v.violations.front());
  }
  const auto n = static_cast<std::size_t>(plan.n_chips);
  if (!caches.empty() && caches.size() != n) {
    throw Error(ErrorCode::kPlanMismatch,
                fmt::format("{} caches for {} chips", caches.size(), plan.n_chips));
  }

  std::vector<ChipState> chips;
  chips.reserve(n);
  for (int c = 0; c < plan.n_chips; ++c) chips.push_back(ChipState::materialize(plan, w, c));
  for (std::size_t c = 0; c < caches.size(); ++c) {
    if (caches[c].first_head() != chips[c].heads.begin ||
        caches[c].num_heads() != chips[c].heads.size() || caches[c].head_dim() != cfg.head_dim) {
      throw Error(ErrorCode::kPlanMismatch, fmt::format("cache {} does not match chip heads", c));
    }
  }
  if (trace) {
    trace->messages.clear();
    trace->chip_weight_bytes.clear();
    for (const auto& st : chips) trace->chip_weight_bytes.push_back(st.weight_elements() * cfg.bytes_per_elem);
  }
  const std::int64_t msg_bytes = x.rows() * cfg.embed_dim * cfg.bytes_per_elem;
  const auto root = static_cast<std::size_t>(plan.tree.root);

  // Per-chip MHSA partials are independent until the first sync.
  std::vector<Matrix> partials(n);
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < n; ++c) {
    const ChipState& st = chips[c];
    const Matrix q = kernels::matmul(x, st.w_query);
    const Matrix k = kernels::matmul(x, st.w_key);
    const Matrix v = kernels::matmul(x, st.w_value);
    KVCache* cache = caches.empty() ? nullptr : &caches[c];
    const Matrix context = attend_heads(q, k, v, st.heads.size(), cfg.head_dim, cfg.causal, cache);
    partials[c] = kernels::matmul(context, st.w_out);
  }

  Matrix h1 = tree_reduce(partials, x, plan, "mhsa", msg_bytes, trace);
  kernels::norm_rows(h1, chips[root].norm1_gain, cfg.norm);
  trace_broadcast(plan, "mhsa", msg_bytes, trace);

#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < n; ++c) {
    partials[c] = fc_partial(h1, chips[c].w_fc1, chips[c].w_fc2, cfg.gelu);
  }

  Matrix out = tree_reduce(partials, h1, plan, "fc", msg_bytes, trace);
  kernels::norm_rows(out, chips[root].norm2_gain, cfg.norm);
  trace_broadcast(plan, "fc", msg_bytes, trace);
  return out;
}

}  // namespace tpsim
