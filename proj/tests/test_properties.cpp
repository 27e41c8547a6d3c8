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


// Randomized checks of the cross-module invariants. Seeds are fixed so a
// failure reproduces.

#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "tpsim/energy.hpp"
#include "tpsim/exec.hpp"
#include "tpsim/perf.hpp"

using namespace tpsim;

TEST_CASE("validate agrees with the field rules") {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> d(-2, 5);
  for (int i = 0; i < 400; ++i) {
    ModelConfig c;
    c.seq_len = d(rng);
    c.embed_dim = d(rng);
    c.head_dim = d(rng);
    c.num_heads = d(rng);
    c.intermediate_dim = d(rng);
    c.num_blocks = d(rng);
    c.bytes_per_elem = d(rng);
    c.mode = d(rng) % 2 ? Mode::kPrompt : Mode::kAutoregressive;
    c.kv_cache_len = d(rng);
    const bool expect = c.seq_len >= 1 && c.embed_dim >= 1 && c.head_dim >= 1 && c.num_heads >= 1 &&
                        c.intermediate_dim >= 1 && c.num_blocks >= 1 &&
                        (c.bytes_per_elem == 1 || c.bytes_per_elem == 2 || c.bytes_per_elem == 4) &&
                        (c.mode == Mode::kPrompt || c.kv_cache_len >= 1);
    CHECK(validate(c).ok() == expect);
  }
}

TEST_CASE("plans conserve parameters and split evenly") {
  std::mt19937_64 rng(202);
  for (int i = 0; i < 200; ++i) {
    const auto cfg = oracle::random_small_config(rng, i % 2 ? Mode::kPrompt : Mode::kAutoregressive);
    for (int n : oracle::valid_chip_counts(cfg)) {
      const auto plan = plan_partition(cfg, n);
      CHECK(verify_plan(plan, cfg).ok());
      std::int64_t total = 0;
      for (auto b : plan.chip_weight_bytes) {
        CHECK(b == plan.chip_weight_bytes.front());
        total += b;
      }
      CHECK(total + norm_param_bytes(cfg) == block_weight_bytes(cfg));
      for (const auto& s : plan.schedule.syncs) {
        CHECK(s.reduce.size() == std::size_t(n - 1));
        CHECK(s.broadcast.size() == std::size_t(n - 1));
      }
    }
  }
}

TEST_CASE("tree reduction order does not matter beyond rounding") {
  std::mt19937_64 rng(303);
  for (int n : {2, 3, 5, 8, 16}) {
    for (int fan_in : {2, 3, 4}) {
      std::vector<Matrix> parts;
      for (int c = 0; c < n; ++c) parts.push_back(random_matrix(3, 5, rng()));
      Matrix flat(3, 5);
      for (const auto& p : parts)
        for (std::int64_t i = 0; i < flat.size(); ++i) flat.values()[i] += p.values()[i];
      auto acc = parts;
      const auto tree = build_reduce_tree(n, fan_in);
      for (const auto& level : tree.levels)
        for (const auto& g : level)
          for (int s : g.senders)
            for (std::int64_t i = 0; i < flat.size(); ++i) acc[g.receiver].values()[i] += acc[s].values()[i];
      CHECK(relative_error(acc[0], flat) <= 1e-6);
    }
  }
}

TEST_CASE("partitioned execution matches the wide-precision oracle") {
  std::mt19937_64 rng(404);
  for (int i = 0; i < 40; ++i) {
    const auto mode = i % 2 ? Mode::kPrompt : Mode::kAutoregressive;
    const auto cfg = oracle::random_small_config(rng, mode);
    const auto w = random_block_weights(cfg, rng());
    const Matrix x = random_matrix(cfg.query_len(), cfg.embed_dim, rng());
    const bool ar = mode == Mode::kAutoregressive;
    KVCache history(cfg.head_dim, cfg.num_heads, cfg.kv_cache_len);
    Matrix pk, pv;
    if (ar && cfg.kv_cache_len > 1) {
      pk = random_matrix(cfg.kv_cache_len - 1, cfg.proj_dim(), rng());
      pv = random_matrix(cfg.kv_cache_len - 1, cfg.proj_dim(), rng());
      history.append(pk, pv);
    }
    const Matrix expect = oracle::block(x, w, cfg, pk, pv);
    for (int n : oracle::valid_chip_counts(cfg)) {
      const auto plan = plan_partition(cfg, n);
      auto caches = ar ? split_cache(history, plan) : std::vector<KVCache>{};
      const Matrix got = run_block_partitioned(x, plan, w, cfg, caches);
      CHECK(relative_error(got, expect) <= 1e-5);
    }
  }
}

TEST_CASE("runtime weight storage equals the block's bytes") {
  std::mt19937_64 rng(505);
  for (int i = 0; i < 50; ++i) {
    const auto cfg = oracle::random_small_config(rng, Mode::kPrompt);
    const auto w = random_block_weights(cfg, rng());
    for (int n : oracle::valid_chip_counts(cfg)) {
      const auto plan = plan_partition(cfg, n);
      std::int64_t elems = 0;
      for (int c = 0; c < n; ++c) elems += ChipState::materialize(plan, w, c).weight_elements();
      CHECK(elems * cfg.bytes_per_elem == block_weight_bytes(cfg));
    }
  }
}

TEST_CASE("timelines conserve bytes and respect resources on random configs") {
  std::mt19937_64 rng(606);
  for (int i = 0; i < 60; ++i) {
    const auto cfg = oracle::random_small_config(rng, i % 2 ? Mode::kPrompt : Mode::kAutoregressive);
    Platform pf;
    // Shrink memories so small models exercise streaming and spilling too.
    pf.chip.l2_bytes = std::int64_t{1} << std::uniform_int_distribution<int>(15, 21)(rng);
    pf.chip.l1_bytes = pf.chip.l2_bytes / 8;
    pf.chip.staging_bytes = pf.chip.l2_bytes / 32;
    pf.options.prefetch = i % 3 ? PrefetchModel::kHideResident : PrefetchModel::kStrictSteadyState;
    pf.options.charge_l2_time = i % 4 == 0;
    std::int64_t macs = -1;
    for (int n : oracle::valid_chip_counts(cfg)) {
      const auto plan = plan_partition(cfg, n);
      const auto res = plan_residency(cfg, plan, pf.chip);
      CHECK(res.l2_footprint <= pf.chip.l2_bytes);
      const auto t = simulate_block(cfg, plan, res, pf);
      CHECK(t.resources_exclusive());
      CHECK(t.recount() == t.counters());
      CHECK(t.counters().c2c_bytes == oracle::block_c2c_bytes(n, pf.fan_in, cfg));
      if (macs < 0) macs = t.counters().macs;
      CHECK(t.counters().macs == macs);
      const auto e = energy_total(t, EnergyConstants{});
      CHECK(e.total_energy >= 0.0);
      CHECK(e.total_energy == doctest::Approx(e.totals.total()));
    }
  }
}
