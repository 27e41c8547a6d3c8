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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tpsim/error.hpp"

namespace tpsim {

enum class Mode { kAutoregressive, kPrompt };
enum class NormKind { kLayerNorm, kRmsNorm };
enum class GeluKind { kErf, kTanh };

std::string_view to_string(Mode m);
std::string_view to_string(NormKind k);
std::string_view to_string(GeluKind k);
std::optional<Mode> parse_mode(std::string_view s);
std::optional<NormKind> parse_norm(std::string_view s);
std::optional<GeluKind> parse_gelu(std::string_view s);

/// Hyperparameters of one Transformer workload.
///
/// In autoregressive mode a block step consumes one query row and attends
/// over `kv_cache_len` positions; `seq_len` is the context length. In prompt
/// mode all `seq_len` rows are processed in one pass.
struct ModelConfig {
  std::int64_t seq_len = 1;           // S
  std::int64_t embed_dim = 1;         // E
  std::int64_t head_dim = 1;          // P
  std::int64_t num_heads = 1;         // H
  std::int64_t intermediate_dim = 1;  // F
  std::int64_t num_blocks = 1;        // L
  Mode mode = Mode::kPrompt;
  std::int64_t bytes_per_elem = 2;    // b
  std::int64_t kv_cache_len = 1;      // C, autoregressive only

  bool causal = true;
  NormKind norm = NormKind::kLayerNorm;
  GeluKind gelu = GeluKind::kErf;

  std::int64_t proj_dim() const { return head_dim * num_heads; }
  std::int64_t query_len() const { return mode == Mode::kAutoregressive ? 1 : seq_len; }
  /// Number of key/value positions one query attends over.
  std::int64_t attended_len() const {
    return mode == Mode::kAutoregressive ? kv_cache_len : seq_len;
  }

  bool operator==(const ModelConfig&) const = default;
};

struct WorkloadPreset {
  std::string name;
  ModelConfig config;
};

/// The shipped presets: tinyllama, mobilebert, tinyllama-scaled.
const std::vector<WorkloadPreset>& presets();

/// Looks up a preset by name. For the TinyLlama family, choosing a mode also
/// selects its sequence length (128 autoregressive, 16 prompt).
/// Throws Error(kInvalidConfig) for unknown names.
ModelConfig preset(std::string_view name, std::optional<Mode> mode = std::nullopt);

ValidationResult validate(const ModelConfig& cfg);

/// Total bytes of one block's parameters, including both norm gain vectors.
std::int64_t block_param_count(const ModelConfig& cfg);
std::int64_t block_weight_bytes(const ModelConfig& cfg);
/// Bytes of the six sliced matrices only (norm gains excluded).
std::int64_t sharded_weight_bytes(const ModelConfig& cfg);
/// Bytes of the two norm gain vectors.
std::int64_t norm_param_bytes(const ModelConfig& cfg);

/// Per-chip activation footprint for one block step over `n_chips`.
struct ActivationBytes {
  std::int64_t input = 0;        // full block input copy, query_len x E
  std::int64_t qkv = 0;          // local Q, K, V slices
  std::int64_t scores = 0;       // local attention logits
  std::int64_t context = 0;      // local attention output
  std::int64_t partial_out = 0;  // query_len x E partial sum
  std::int64_t fc_hidden = 0;    // local slice of the FC intermediate
  std::int64_t kv_cache = 0;     // local KV-cache slice (autoregressive)

  std::int64_t total() const {
    return input + qkv + scores + context + partial_out + fc_hidden + kv_cache;
  }
};

/// Throws Error(kIndivisibleHeads) when num_heads % n_chips != 0.
ActivationBytes activation_bytes(const ModelConfig& cfg, std::int64_t n_chips);

}  // namespace tpsim
