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

#include "tpsim/plan_json.hpp"

#include <fmt/format.h>

namespace tpsim {

using nlohmann::json;

json config_to_json(const ModelConfig& cfg) {
  return json{{"seq_len", cfg.seq_len},
              {"embed_dim", cfg.embed_dim},
              {"head_dim", cfg.head_dim},
              {"num_heads", cfg.num_heads},
              {"intermediate_dim", cfg.intermediate_dim},
              {"num_blocks", cfg.num_blocks},
              {"mode", std::string(to_string(cfg.mode))},
              {"bytes_per_elem", cfg.bytes_per_elem},
              {"kv_cache_len", cfg.kv_cache_len},
              {"causal", cfg.causal},
              {"norm", std::string(to_string(cfg.norm))},
              {"gelu", std::string(to_string(cfg.gelu))}};
}

ModelConfig config_from_json(const json& j) {
  try {
    ModelConfig cfg;
    cfg.seq_len = j.at("seq_len").get<std::int64_t>();
    cfg.embed_dim = j.at("embed_dim").get<std::int64_t>();
    cfg.head_dim = j.at("head_dim").get<std::int64_t>();
    cfg.num_heads = j.at("num_heads").get<std::int64_t>();
    cfg.intermediate_dim = j.at("intermediate_dim").get<std::int64_t>();
    cfg.num_blocks = j.at("num_blocks").get<std::int64_t>();
    cfg.bytes_per_elem = j.at("bytes_per_elem").get<std::int64_t>();
    cfg.kv_cache_len = j.at("kv_cache_len").get<std::int64_t>();
    cfg.causal = j.at("causal").get<bool>();
    const auto mode = parse_mode(j.at("mode").get<std::string>());
    const auto norm = parse_norm(j.at("norm").get<std::string>());
    const auto gelu = parse_gelu(j.at("gelu").get<std::string>());
    if (!mode || !norm || !gelu) throw Error(ErrorCode::kInvalidConfig, "bad enum value");
    cfg.mode = *mode;
    cfg.norm = *norm;
    cfg.gelu = *gelu;
    return cfg;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, e.what());
  }
}

namespace {

json message_json(const Message& m) {
  return json{{"src", m.src}, {"dst", m.dst}, {"bytes", m.bytes}, {"label", m.label},
              {"level", m.level}};
}

Message message_from(const json& j) {
  return Message{j.at("src").get<int>(), j.at("dst").get<int>(), j.at("bytes").get<std::int64_t>(),
                 j.at("label").get<std::string>(), j.at("level").get<int>()};
}

json range_json(const Range& r) { return json::array({r.begin, r.end}); }
Range range_from(const json& j) { return {j.at(0).get<std::int64_t>(), j.at(1).get<std::int64_t>()}; }

}  // namespace

json plan_to_json(const PartitionPlan& plan) {
  json shards = json::array();
  for (const auto& s : plan.shards) {
    shards.push_back(json{{"chip", s.chip},
                          {"tensor", std::string(to_string(s.tensor))},
                          {"rows", range_json(s.rows)},
                          {"cols", range_json(s.cols)}});
  }
  json levels = json::array();
  for (const auto& level : plan.tree.levels) {
    json groups = json::array();
    for (const auto& g : level) groups.push_back(json{{"receiver", g.receiver}, {"senders", g.senders}});
    levels.push_back(std::move(groups));
  }
  json schedule = json::array();
  for (const auto& sync : plan.schedule.syncs) {
    json reduce = json::array();
    json bcast = json::array();
    for (const auto& m : sync.reduce) reduce.push_back(message_json(m));
    for (const auto& m : sync.broadcast) bcast.push_back(message_json(m));
    schedule.push_back(json{{"label", sync.label},
                            {"norm_chip", sync.norm_chip},
                            {"reduce", std::move(reduce)},
                            {"broadcast", std::move(bcast)}});
  }
  return json{{"schema_version", kPlanSchemaVersion},
              {"n_chips", plan.n_chips},
              {"config", config_to_json(plan.config)},
              {"shards", std::move(shards)},
              {"chip_weight_bytes", plan.chip_weight_bytes},
              {"tree", json{{"fan_in", plan.tree.fan_in},
                            {"root", plan.tree.root},
                            {"levels", std::move(levels)}}},
              {"schedule", std::move(schedule)}};
}

PartitionPlan plan_from_json(const json& j) {
  try {
    if (j.at("schema_version").get<int>() != kPlanSchemaVersion) {
      throw Error(ErrorCode::kInvalidConfig, "unsupported plan schema_version");
    }
    PartitionPlan plan;
    plan.n_chips = j.at("n_chips").get<int>();
    plan.config = config_from_json(j.at("config"));
    for (const auto& s : j.at("shards")) {
      const auto t = parse_weight_tensor(s.at("tensor").get<std::string>());
      if (!t) throw Error(ErrorCode::kInvalidConfig, "unknown tensor name in plan");
      plan.shards.push_back({s.at("chip").get<int>(), *t, range_from(s.at("rows")),
                             range_from(s.at("cols"))});
    }
    plan.chip_weight_bytes = j.at("chip_weight_bytes").get<std::vector<std::int64_t>>();
    const auto& tree = j.at("tree");
    plan.tree.n_chips = plan.n_chips;
    plan.tree.fan_in = tree.at("fan_in").get<int>();
    plan.tree.root = tree.at("root").get<int>();
    for (const auto& level : tree.at("levels")) {
      std::vector<ReduceGroup> groups;
      for (const auto& g : level) {
        groups.push_back({g.at("receiver").get<int>(), g.at("senders").get<std::vector<int>>()});
      }
      plan.tree.levels.push_back(std::move(groups));
    }
    for (const auto& s : j.at("schedule")) {
      SyncPoint sync;
      sync.label = s.at("label").get<std::string>();
      sync.norm_chip = s.at("norm_chip").get<int>();
      for (const auto& m : s.at("reduce")) sync.reduce.push_back(message_from(m));
      for (const auto& m : s.at("broadcast")) sync.broadcast.push_back(message_from(m));
      plan.schedule.syncs.push_back(std::move(sync));
    }
    return plan;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, fmt::format("malformed plan JSON: {}", e.what()));
  }
}

}  // namespace tpsim
