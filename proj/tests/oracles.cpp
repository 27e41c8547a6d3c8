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


#include "oracles.hpp"

#include <cmath>
#include <map>

namespace tpsim::oracle {
namespace {

using LD = long double;
using Rows = std::vector<std::vector<LD>>;

Rows to_rows(const Matrix& m) {
  Rows r(m.rows(), std::vector<LD>(m.cols()));
  for (std::int64_t i = 0; i < m.rows(); ++i)
    for (std::int64_t j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
  return r;
}

Rows mul(const Rows& a, const Matrix& b) {
  Rows c(a.size(), std::vector<LD>(b.cols(), 0.0L));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::int64_t j = 0; j < b.cols(); ++j) {
      LD s = 0.0L;
      for (std::int64_t k = 0; k < b.rows(); ++k) s += a[i][k] * b(k, j);
      c[i][j] = s;
    }
  return c;
}

void norm(Rows& x, const std::vector<double>& gain, NormKind kind) {
  for (auto& row : x) {
    const LD n = row.size();
    LD mean = 0.0L;
    if (kind == NormKind::kLayerNorm) {
      for (LD v : row) mean += v;
      mean /= n;
    }
    LD var = 0.0L;
    for (LD v : row) var += (v - mean) * (v - mean);
    var /= n;
    const LD inv = 1.0L / std::sqrt(var + 1e-5L);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean) * inv * gain[j];
  }
}

LD gelu(LD x, GeluKind kind) {
  if (kind == GeluKind::kErf) return 0.5L * x * (1.0L + std::erf(x / std::sqrt(2.0L)));
  const LD c = std::sqrt(2.0L / 3.14159265358979323846264338327950288L);
  return 0.5L * x * (1.0L + std::tanh(c * (x + 0.044715L * x * x * x)));
}

}  // namespace

Matrix block(const Matrix& x, const BlockWeights& w, const ModelConfig& cfg,
             const Matrix& prior_k, const Matrix& prior_v) {
  const auto q_len = x.rows();
  const auto e = cfg.embed_dim;
  const auto p = cfg.head_dim;
  const auto h = cfg.num_heads;
  const Rows xin = to_rows(x);
  const Rows q = mul(xin, w.w_query);
  Rows k = to_rows(prior_k);
  Rows v = to_rows(prior_v);
  for (const auto& row : mul(xin, w.w_key)) k.push_back(row);
  for (const auto& row : mul(xin, w.w_value)) v.push_back(row);
  const auto kv_len = static_cast<std::int64_t>(k.size());
  const auto offset = kv_len - q_len;  // queries are the newest positions

  Rows ctx(q_len, std::vector<LD>(p * h, 0.0L));
  for (std::int64_t head = 0; head < h; ++head) {
    for (std::int64_t i = 0; i < q_len; ++i) {
      const std::int64_t last = cfg.causal ? offset + i : kv_len - 1;
      std::vector<LD> logit(last + 1);
      LD mx = -INFINITY;
      for (std::int64_t j = 0; j <= last; ++j) {
        LD s = 0.0L;
        for (std::int64_t d = 0; d < p; ++d) s += q[i][head * p + d] * k[j][head * p + d];
        logit[j] = s / std::sqrt(static_cast<LD>(p));
        mx = std::max(mx, logit[j]);
      }
      LD z = 0.0L;
      for (auto& l : logit) z += (l = std::exp(l - mx));
      for (std::int64_t j = 0; j <= last; ++j)
        for (std::int64_t d = 0; d < p; ++d) ctx[i][head * p + d] += logit[j] / z * v[j][head * p + d];
    }
  }

  Rows h1 = mul(ctx, w.w_out);
  for (std::int64_t i = 0; i < q_len; ++i)
    for (std::int64_t j = 0; j < e; ++j) h1[i][j] += xin[i][j];
  norm(h1, w.norm1_gain, cfg.norm);

  Rows hid = mul(h1, w.w_fc1);
  for (auto& row : hid)
    for (auto& val : row) val = gelu(val, cfg.gelu);
  Rows out = mul(hid, w.w_fc2);
  for (std::int64_t i = 0; i < q_len; ++i)
    for (std::int64_t j = 0; j < e; ++j) out[i][j] += h1[i][j];
  norm(out, w.norm2_gain, cfg.norm);

  Matrix r(q_len, e);
  for (std::int64_t i = 0; i < q_len; ++i)
    for (std::int64_t j = 0; j < e; ++j) r(i, j) = static_cast<double>(out[i][j]);
  return r;
}

Coverage coverage(const PartitionPlan& plan, const ModelConfig& cfg) {
  Coverage c;
  for (auto t : kWeightTensors) {
    const auto shape = tensor_shape(cfg, t);
    std::vector<int> hits(shape.rows * shape.cols, 0);
    for (const auto& s : plan.shards) {
      if (s.tensor != t) continue;
      for (auto r = s.rows.begin; r < s.rows.end; ++r)
        for (auto col = s.cols.begin; col < s.cols.end; ++col) {
          if (r < 0 || r >= shape.rows || col < 0 || col >= shape.cols) {
            ++c.out_of_range;
            continue;
          }
          ++hits[r * shape.cols + col];
        }
    }
    for (int h : hits) {
      ++c.elements;
      if (h == 0) ++c.uncovered;
      if (h == 1) ++c.covered_once;
      if (h > 1) ++c.duplicated;
    }
  }
  return c;
}

std::vector<Msg> reduce_messages(int n_chips, int fan_in) {
  std::vector<int> alive;
  for (int i = 0; i < n_chips; ++i) alive.push_back(i);
  std::vector<Msg> out;
  int level = 0;
  while (alive.size() > 1) {
    std::vector<int> next;
    for (std::size_t g = 0; g < alive.size(); g += fan_in) {
      next.push_back(alive[g]);
      for (std::size_t m = g + 1; m < std::min(alive.size(), g + fan_in); ++m) {
        out.push_back({alive[m], alive[g], level});
      }
    }
    alive = next;
    ++level;
  }
  return out;
}

std::int64_t block_c2c_bytes(int n_chips, int fan_in, const ModelConfig& cfg) {
  const auto per_msg = cfg.query_len() * cfg.embed_dim * cfg.bytes_per_elem;
  const auto reduce = static_cast<std::int64_t>(reduce_messages(n_chips, fan_in).size());
  // reduce + broadcast, for the attention sync and the FC sync
  return 2 * 2 * reduce * per_msg;
}

ModelConfig random_small_config(std::mt19937_64& rng, Mode mode) {
  auto pick = [&](std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
  };
  ModelConfig c;
  c.num_heads = std::int64_t{1} << pick(0, 3);
  c.head_dim = pick(1, 64 / c.num_heads);
  c.embed_dim = pick(1, 64);
  c.intermediate_dim = c.num_heads * pick(1, 128 / c.num_heads);
  c.seq_len = pick(1, 8);
  c.num_blocks = pick(1, 4);
  c.mode = mode;
  c.kv_cache_len = mode == Mode::kAutoregressive ? pick(1, 8) : c.seq_len;
  c.causal = pick(0, 1) == 1;
  c.norm = pick(0, 1) ? NormKind::kLayerNorm : NormKind::kRmsNorm;
  c.gelu = pick(0, 1) ? GeluKind::kErf : GeluKind::kTanh;
  c.bytes_per_elem = std::int64_t{1} << pick(0, 2);
  return c;
}

std::vector<int> valid_chip_counts(const ModelConfig& cfg) {
  std::vector<int> out;
  for (int n = 1; n <= cfg.num_heads; ++n) {
    if (cfg.num_heads % n == 0 && cfg.intermediate_dim % n == 0) out.push_back(n);
  }
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::int64_t i = 0; i < a.rows(); ++i)
    for (std::int64_t j = 0; j < b.cols(); ++j) {
      LD s = 0.0L;
      for (std::int64_t k = 0; k < a.cols(); ++k) s += static_cast<LD>(a(i, k)) * b(k, j);
      c(i, j) = static_cast<double>(s);
    }
  return c;
}

}  // namespace tpsim::oracle
