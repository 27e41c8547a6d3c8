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


#include <doctest.h>

#include "oracles.hpp"
#include "tpsim/partition.hpp"
#include "tpsim/plan_json.hpp"

using namespace tpsim;

namespace {

ModelConfig small_cfg() {
  ModelConfig c;
  c.seq_len = 4;
  c.embed_dim = 16;
  c.head_dim = 4;
  c.num_heads = 8;
  c.intermediate_dim = 32;
  c.num_blocks = 1;
  c.mode = Mode::kPrompt;
  c.kv_cache_len = 4;
  return c;
}

}  // namespace

TEST_CASE("reduce tree shape") {
  auto t1 = build_reduce_tree(1);
  CHECK(t1.levels.empty());
  CHECK(t1.message_count() == 0);

  auto t4 = build_reduce_tree(4);
  REQUIRE(t4.levels.size() == 1);
  REQUIRE(t4.levels[0].size() == 1);
  CHECK(t4.levels[0][0].receiver == 0);
  CHECK(t4.levels[0][0].senders == std::vector<int>{1, 2, 3});

  // 8 chips, fan-in 4: {0..3}->0, {4..7}->4, then 4->0.
  auto t8 = build_reduce_tree(8);
  REQUIRE(t8.levels.size() == 2);
  CHECK(t8.levels[0][1].receiver == 4);
  CHECK(t8.levels[1][0].senders == std::vector<int>{4});

  CHECK(build_reduce_tree(64).levels.size() == 3);
  CHECK(build_reduce_tree(16, 2).levels.size() == 4);
  for (int n : {1, 2, 3, 5, 8, 17, 64}) {
    for (int f : {2, 3, 4, 8}) CHECK(build_reduce_tree(n, f).message_count() == std::size_t(n - 1));
  }
}

TEST_CASE("tree matches the independent message enumeration") {
  for (int n : {1, 2, 4, 6, 8, 16, 32, 64}) {
    for (int f : {2, 4}) {
      const auto tree = build_reduce_tree(n, f);
      std::vector<oracle::Msg> got;
      for (std::size_t l = 0; l < tree.levels.size(); ++l)
        for (const auto& g : tree.levels[l])
          for (int s : g.senders) got.push_back({s, g.receiver, static_cast<int>(l)});
      CHECK(got == oracle::reduce_messages(n, f));
    }
  }
}

TEST_CASE("tinyllama over 8 chips") {
  const auto cfg = preset("tinyllama");
  const auto plan = plan_partition(cfg, 8);
  for (int c = 0; c < 8; ++c) {
    CHECK(plan.shard(c, WeightTensor::kQuery).cols == Range{c * 64, (c + 1) * 64});
    CHECK(plan.shard(c, WeightTensor::kOut).rows == Range{c * 64, (c + 1) * 64});
    CHECK(plan.shard(c, WeightTensor::kFc1).cols.size() == 256);
    CHECK(plan.shard(c, WeightTensor::kFc2).rows == plan.shard(c, WeightTensor::kFc1).cols);
    CHECK(plan.chip_weight_bytes[c] == sharded_weight_bytes(cfg) / 8);
  }
  CHECK(verify_plan(plan, cfg).ok());
}

TEST_CASE("one chip holds everything and sends nothing") {
  const auto cfg = preset("mobilebert");
  const auto plan = plan_partition(cfg, 1);
  CHECK(plan.shards.size() == 6);
  for (auto t : kWeightTensors) {
    const auto s = tensor_shape(cfg, t);
    CHECK(plan.shard(0, t).elements() == s.rows * s.cols);
  }
  for (const auto& sync : plan.schedule.syncs) {
    CHECK(sync.reduce.empty());
    CHECK(sync.broadcast.empty());
  }
  CHECK(comm_bytes_per_block(plan, cfg) == 0);
}

TEST_CASE("indivisible chip counts are rejected") {
  try {
    plan_partition(preset("tinyllama"), 3);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIndivisibleHeads);
  }
  auto cfg = small_cfg();
  cfg.intermediate_dim = 36;  // 8 heads divide, 36 columns do not
  try {
    plan_partition(cfg, 8);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIndivisibleIntermediate);
  }
  CHECK_THROWS_AS(plan_partition(cfg, 0), Error);
}

TEST_CASE("exhaustive index coverage at small dims") {
  const auto cfg = small_cfg();
  for (int n : {1, 2, 4, 8}) {
    const auto plan = plan_partition(cfg, n);
    const auto cov = oracle::coverage(plan, cfg);
    CHECK(cov.elements == sharded_weight_bytes(cfg) / cfg.bytes_per_elem);
    CHECK(cov.covered_once == cov.elements);
    CHECK(cov.duplicated == 0);
    CHECK(cov.uncovered == 0);
    CHECK(cov.out_of_range == 0);
  }
}

TEST_CASE("schedule labels and message sizes") {
  const auto cfg = preset("tinyllama", Mode::kPrompt);
  const auto plan = plan_partition(cfg, 8);
  REQUIRE(plan.schedule.syncs.size() == 2);
  CHECK(plan.schedule.syncs[0].label == "mhsa");
  CHECK(plan.schedule.syncs[1].label == "fc");
  for (const auto& s : plan.schedule.syncs) {
    CHECK(s.norm_chip == 0);
    CHECK(s.reduce.size() == 7);
    CHECK(s.broadcast.size() == 7);
    for (const auto& m : s.reduce) {
      CHECK(m.bytes == 16 * 512 * 2);
      CHECK(m.label == s.label + "/partial");
    }
    for (const auto& m : s.broadcast) CHECK(m.label == s.label + "/normalized");
  }
}

TEST_CASE("communication bytes per block") {
  // 4 * (n - 1) * query_len * E * b
  CHECK(comm_bytes_per_block(plan_partition(preset("tinyllama", Mode::kAutoregressive), 8),
                             preset("tinyllama", Mode::kAutoregressive)) == 28'672);
  CHECK(comm_bytes_per_block(plan_partition(preset("tinyllama", Mode::kPrompt), 8),
                             preset("tinyllama", Mode::kPrompt)) == 458'752);
  const auto scaled = preset("tinyllama-scaled");
  for (int n : {2, 4, 8, 16, 32, 64}) {
    const auto plan = plan_partition(scaled, n);
    std::int64_t sum = 0;
    for (const auto& s : plan.schedule.syncs) {
      for (const auto& m : s.reduce) sum += m.bytes;
      for (const auto& m : s.broadcast) sum += m.bytes;
    }
    CHECK(sum == comm_bytes_per_block(plan, scaled));
    CHECK(sum == oracle::block_c2c_bytes(n, 4, scaled));
  }
}

TEST_CASE("verify_plan catches corrupted plans") {
  const auto cfg = small_cfg();
  const auto good = plan_partition(cfg, 4);

  auto dup = good;
  for (auto& s : dup.shards)
    if (s.chip == 2 && s.tensor == WeightTensor::kFc1) s.cols = good.shard(1, WeightTensor::kFc1).cols;
  CHECK(verify_plan(dup, cfg).has_violation("duplication"));

  auto gap = good;
  gap.shards.erase(gap.shards.begin() + 6);  // chip 1's W_query
  const auto gv = verify_plan(gap, cfg);
  CHECK(gv.has_violation("coverage gap"));
  CHECK(gv.has_violation("missing shard"));

  auto syncs = good;
  syncs.schedule.syncs.pop_back();
  CHECK(verify_plan(syncs, cfg).has_violation("sync count: expected 2, got 1"));

  auto bytes = good;
  bytes.schedule.syncs[0].reduce[0].bytes += 2;
  CHECK(verify_plan(bytes, cfg).has_violation("message bytes"));

  auto count = good;
  count.schedule.syncs[1].broadcast.pop_back();
  CHECK(verify_plan(count, cfg).has_violation("message count"));
}

TEST_CASE("plans are deterministic and survive JSON") {
  const auto cfg = preset("tinyllama-scaled");
  const auto a = plan_partition(cfg, 16);
  const auto b = plan_partition(cfg, 16);
  CHECK(a == b);
  CHECK(plan_from_json(plan_to_json(a)) == a);
  CHECK(config_from_json(config_to_json(cfg)) == cfg);
}
