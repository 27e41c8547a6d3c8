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


// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "oracles.hpp"
#include "tpsim/energy.hpp"
#include "tpsim/exec.hpp"
#include "tpsim/perf.hpp"
#include "tpsim/runner.hpp"

using namespace tpsim;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Outcome equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  int cases = 0, runs = 0, bad = 0;
  double worst = 0.0;
  for (; cases < 200; ++cases) {
    const auto mode = cases % 2 ? Mode::kPrompt : Mode::kAutoregressive;
    const auto cfg = oracle::random_small_config(rng, mode);
    for (const auto& c : verify_equivalence(cfg, oracle::valid_chip_counts(cfg), rng())) {
      ++runs;
      worst = std::max(worst, c.max_rel_error);
      if (!c.ok) ++bad;
    }
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 60.0,
          fmt::format("{} configs, {} partitioned runs, {} over 1e-5, max rel err {:.2e}, {:.2f} s",
                      cases, runs, bad, worst, secs)};
}

Outcome no_duplication() {
  std::mt19937_64 rng(2);
  int checked = 0, bad = 0;
  while (checked < 500) {
    const auto cfg = oracle::random_small_config(rng, checked % 2 ? Mode::kPrompt : Mode::kAutoregressive);
    const auto ns = oracle::valid_chip_counts(cfg);
    const int n = ns[std::uniform_int_distribution<std::size_t>(0, ns.size() - 1)(rng)];
    const auto plan = plan_partition(cfg, n);
    const auto cov = oracle::coverage(plan, cfg);
    std::int64_t shard_bytes = 0;
    for (const auto& s : plan.shards) shard_bytes += s.elements() * cfg.bytes_per_elem;
    const bool ok = cov.duplicated == 0 && cov.uncovered == 0 && cov.out_of_range == 0 &&
                    cov.covered_once == cov.elements &&
                    shard_bytes + norm_param_bytes(cfg) == block_weight_bytes(cfg);
    if (!ok) ++bad;
    ++checked;
  }
  return {bad == 0, fmt::format("{} random (cfg, n) plans, exhaustive index check, {} failures",
                                checked, bad)};
}

Outcome comm_accounting() {
  int bad = 0;
  std::string last;
  for (auto mode : {Mode::kAutoregressive, Mode::kPrompt}) {
    const auto cfg = preset("tinyllama-scaled", mode);
    for (int n : {2, 4, 8, 16, 32, 64}) {
      const auto plan = plan_partition(cfg, n);
      Platform pf;
      const auto t = simulate_block(cfg, plan, plan_residency(cfg, plan, pf.chip), pf);
      const std::int64_t closed = 4 * (n - 1) * cfg.query_len() * cfg.embed_dim * cfg.bytes_per_elem;
      const auto simulated = t.counters().c2c_bytes;
      if (simulated != closed || oracle::block_c2c_bytes(n, 4, cfg) != closed ||
          comm_bytes_per_block(plan, cfg) != closed) {
        ++bad;
      }
      last = fmt::format("n=64 {} bytes", simulated);
    }
  }
  return {bad == 0, fmt::format("n in 2..64, both modes, {} mismatches ({})", bad, last)};
}

Outcome energy_formula() {
  auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
  Counters c;
  c.c2c_sent_bytes = {0};
  c.l3_bytes = {0};
  c.l2_l1_bytes = {0};
  c.compute_time = {1e-3};
  const double compute = energy_total(c, EnergyConstants{}).total_energy;

  const auto cfg = preset("tinyllama", Mode::kAutoregressive);
  Counters m;
  m.c2c_sent_bytes.assign(8, 0);
  m.l3_bytes.assign(8, 0);
  m.l2_l1_bytes.assign(8, 0);
  m.compute_time.assign(8, 0.0);
  m.c2c_bytes = comm_bytes_per_block(plan_partition(cfg, 8), cfg);
  const double link = energy_total(m, EnergyConstants{}).totals.c2c;

  EnergyReport r;
  r.total_energy = 0.64e-3;
  const double product = edp(r, 0.54e-3);

  const bool ok = rel(compute, 104e-6) <= 1e-12 && rel(link, 2.8672e-6) <= 1e-12 &&
                  product == 0.64e-3 * 0.54e-3 && rel(product, 3.456e-7) <= 1e-15;
  return {ok, fmt::format("compute {:.6g} J, c2c {:.6g} J, EDP {:.6g} J*s", compute, link, product)};
}

Outcome trends() {
  Platform pf;
  std::string why;
  double slowest = 0.0;
  auto run = [&](const ModelConfig& cfg, std::vector<int> ns) {
    const auto t0 = Clock::now();
    auto pts = sweep(cfg, ns, pf);
    slowest = std::max(slowest, seconds_since(t0));
    return pts;
  };
  bool ok = true;
  auto require = [&](bool cond, const std::string& label) {
    if (!cond) ok = false;
    why += fmt::format("{}{}={}", why.empty() ? "" : ", ", label, cond ? "ok" : "FAIL");
  };

  const auto ar = run(preset("tinyllama", Mode::kAutoregressive), {1, 2, 4, 8});
  require(ar[3].ok && ar[3].speedup > 8.0, fmt::format("a:speedup8 {:.1f}", ar[3].speedup));
  require(ar[0].breakdown.fraction(Category::kL3) > 0.5,
          fmt::format("a:l3 {:.0f}%", 100 * ar[0].breakdown.fraction(Category::kL3)));

  const auto pr = run(preset("tinyllama", Mode::kPrompt), {1});
  require(pr[0].breakdown.fraction(Category::kCompute) > 0.5,
          fmt::format("b:compute {:.0f}%", 100 * pr[0].breakdown.fraction(Category::kCompute)));

  const auto mb = run(preset("mobilebert"), {1, 2, 4});
  require(mb[2].ok && mb[2].speedup > 4.0, fmt::format("c:speedup4 {:.2f}", mb[2].speedup));

  const auto sc = run(preset("tinyllama-scaled", Mode::kAutoregressive), {1, 2, 4, 8, 16, 32, 64});
  bool monotone = true;
  for (std::size_t i = 1; i < sc.size(); ++i) monotone = monotone && sc[i].ok && sc[i].speedup >= sc[i - 1].speedup;
  require(monotone, "d:monotone");
  require(sc[3].speedup > 8.0 && sc[4].speedup > 16.0,
          fmt::format("d:superlinear {:.1f}/{:.1f}", sc[3].speedup, sc[4].speedup));
  std::int64_t l3 = 0;
  for (auto b : sc[5].timeline->counters().l3_bytes) l3 += b;
  require(sc[5].residency.all_blocks_resident && l3 == 0, "d:resident32");
  require(slowest < 30.0, fmt::format("slowest sweep {:.3f} s", slowest));
  return {ok, why};
}

Outcome kv_cache_oracle() {
  std::mt19937_64 rng(6);
  constexpr int kSteps = 8;
  int bad = 0;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    auto prompt = oracle::random_small_config(rng, Mode::kPrompt);
    prompt.seq_len = kSteps;
    prompt.kv_cache_len = kSteps;
    prompt.causal = true;
    auto step = prompt;
    step.mode = Mode::kAutoregressive;

    const auto w = random_block_weights(prompt, rng());
    const Matrix x = random_matrix(kSteps, prompt.embed_dim, rng());
    const Matrix full = run_block_monolithic(x, w, prompt);

    const auto ns = oracle::valid_chip_counts(step);
    const int n = ns[std::uniform_int_distribution<std::size_t>(0, ns.size() - 1)(rng)];
    const auto plan = plan_partition(step, n);
    auto caches = split_cache(KVCache(step.head_dim, step.num_heads, kSteps), plan);
    for (int t = 0; t < kSteps; ++t) {
      const Matrix row = run_block_partitioned(x.block(t, t + 1, 0, step.embed_dim), plan, w, step, caches);
      const double err = relative_error(row, full.block(t, t + 1, 0, step.embed_dim));
      worst = std::max(worst, err);
      if (!(err <= 1e-5)) ++bad;
    }
  }
  return {bad == 0, fmt::format("20 configs x {} steps, {} rows over 1e-5, max rel err {:.2e}", kSteps,
                                bad, worst)};
}

Outcome determinism() {
  int specs = 0, bad = 0;
  for (const char* src : {"tinyllama", "mobilebert", "tinyllama-scaled"}) {
    for (auto fmt_kind : {OutputFormat::kCsv, OutputFormat::kJson}) {
      RunSpec spec;
      spec.source = src;
      spec.chips = parse_chip_list("1..64");
      spec.format = fmt_kind;
      std::ostringstream a, b, ea, eb;
      cmd_run(spec, std::nullopt, a, ea);
      cmd_run(spec, std::nullopt, b, eb);
      ++specs;
      if (a.str() != b.str() || a.str().empty()) ++bad;
    }
  }
  return {bad == 0, fmt::format("{} run specs rendered twice, {} differ", specs, bad)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 equivalence", equivalence},        {"2 no-duplication", no_duplication},
      {"3 communication accounting", comm_accounting}, {"4 energy formula", energy_formula},
      {"5 trend reproduction", trends},      {"6 kv-cache oracle", kv_cache_oracle},
      {"7 determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s  [%s] %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
