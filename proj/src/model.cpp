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

#include "tpsim/model.hpp"

#include <fmt/format.h>

namespace tpsim {

std::string_view to_string(Mode m) {
  return m == Mode::kAutoregressive ? "autoregressive" : "prompt";
}
std::string_view to_string(NormKind k) {
  return k == NormKind::kLayerNorm ? "layer-norm" : "rms-norm";
}
std::string_view to_string(GeluKind k) { return k == GeluKind::kErf ? "erf" : "tanh"; }

std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "autoregressive" || s == "ar") return Mode::kAutoregressive;
  if (s == "prompt") return Mode::kPrompt;
  return std::nullopt;
}
std::optional<NormKind> parse_norm(std::string_view s) {
  if (s == "layer-norm" || s == "layernorm") return NormKind::kLayerNorm;
  if (s == "rms-norm" || s == "rmsnorm") return NormKind::kRmsNorm;
  return std::nullopt;
}
std::optional<GeluKind> parse_gelu(std::string_view s) {
  if (s == "erf") return GeluKind::kErf;
  if (s == "tanh") return GeluKind::kTanh;
  return std::nullopt;
}

namespace {

ModelConfig tinyllama_base(std::int64_t heads) {
  ModelConfig c;
  c.embed_dim = 512;
  c.intermediate_dim = 2048;
  c.num_heads = heads;
  c.head_dim = 64;
  c.num_blocks = 3;
  c.mode = Mode::kAutoregressive;
  c.seq_len = 128;
  c.kv_cache_len = 128;
  c.bytes_per_elem = 2;
  c.causal = true;
  return c;
}

ModelConfig mobilebert_base() {
  ModelConfig c;
  c.embed_dim = 512;
  c.intermediate_dim = 512;
  c.num_heads = 4;
  c.head_dim = 128;
  c.num_blocks = 24;
  c.mode = Mode::kPrompt;
  c.seq_len = 268;
  c.kv_cache_len = 268;
  c.bytes_per_elem = 2;
  c.causal = false;
  return c;
}

}  // namespace

const std::vector<WorkloadPreset>& presets() {
  static const std::vector<WorkloadPreset> kPresets = {
      {"tinyllama", tinyllama_base(8)},
      {"mobilebert", mobilebert_base()},
      {"tinyllama-scaled", tinyllama_base(64)},
  };
  return kPresets;
}

ModelConfig preset(std::string_view name, std::optional<Mode> mode) {
  for (const auto& p : presets()) {
    if (p.name != name) continue;
    ModelConfig cfg = p.config;
    if (!mode) return cfg;
    const bool tinyllama_family = name.starts_with("tinyllama");
    cfg.mode = *mode;
    if (tinyllama_family) {
      cfg.seq_len = (*mode == Mode::kAutoregressive) ? 128 : 16;
    }
    cfg.kv_cache_len = cfg.seq_len;
    return cfg;
  }
  throw Error(ErrorCode::kInvalidConfig, fmt::format("unknown preset '{}'", name));
}

ValidationResult validate(const ModelConfig& cfg) {
  ValidationResult r;
  auto require = [&](bool cond, std::string_view what) {
    if (!cond) r.violations.emplace_back(what);
  };
  require(cfg.seq_len >= 1, "seq_len >= 1");
  require(cfg.embed_dim >= 1, "embed_dim >= 1");
  require(cfg.head_dim >= 1, "head_dim >= 1");
  require(cfg.num_heads >= 1, "num_heads >= 1");
  require(cfg.intermediate_dim >= 1, "intermediate_dim >= 1");
  require(cfg.num_blocks >= 1, "num_blocks >= 1");
  require(cfg.bytes_per_elem == 1 || cfg.bytes_per_elem == 2 || cfg.bytes_per_elem == 4,
          "bytes_per_elem in {1, 2, 4}");
  if (cfg.mode == Mode::kAutoregressive) {
    require(cfg.kv_cache_len >= 1, "kv_cache_len >= 1 in autoregressive mode");
  }
  if (r.ok() && cfg.embed_dim != cfg.proj_dim()) {
    r.warnings.push_back(fmt::format("embed_dim ({}) != head_dim * num_heads ({})",
                                     cfg.embed_dim, cfg.proj_dim()));
  }
  return r;
}

std::int64_t block_param_count(const ModelConfig& cfg) {
  const std::int64_t e = cfg.embed_dim;
  return 4 * e * cfg.proj_dim() + 2 * e * cfg.intermediate_dim + 2 * e;
}

std::int64_t block_weight_bytes(const ModelConfig& cfg) {
  return block_param_count(cfg) * cfg.bytes_per_elem;
}

std::int64_t sharded_weight_bytes(const ModelConfig& cfg) {
  const std::int64_t e = cfg.embed_dim;
  return (4 * e * cfg.proj_dim() + 2 * e * cfg.intermediate_dim) * cfg.bytes_per_elem;
}

std::int64_t norm_param_bytes(const ModelConfig& cfg) {
  return 2 * cfg.embed_dim * cfg.bytes_per_elem;
}

ActivationBytes activation_bytes(const ModelConfig& cfg, std::int64_t n_chips) {
  if (n_chips < 1 || cfg.num_heads % n_chips != 0) {
    throw Error(ErrorCode::kIndivisibleHeads,
                fmt::format("{} heads over {} chips", cfg.num_heads, n_chips));
  }
  const std::int64_t b = cfg.bytes_per_elem;
  const std::int64_t q = cfg.query_len();
  const std::int64_t local_heads = cfg.num_heads / n_chips;
  const std::int64_t local_proj = cfg.head_dim * local_heads;
  // F need not divide evenly here; the widest slice bounds the footprint.
  const std::int64_t local_f = (cfg.intermediate_dim + n_chips - 1) / n_chips;

  ActivationBytes a;
  a.input = q * cfg.embed_dim * b;
  a.qkv = 3 * q * local_proj * b;
  a.scores = q * cfg.attended_len() * local_heads * b;
  a.context = q * local_proj * b;
  a.partial_out = q * cfg.embed_dim * b;
  a.fc_hidden = q * local_f * b;
  if (cfg.mode == Mode::kAutoregressive) {
    a.kv_cache = 2 * cfg.kv_cache_len * local_proj * b;
  }
  return a;
}

}  // namespace tpsim
