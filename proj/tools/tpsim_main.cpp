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


// tpsim: plan, simulate and verify tensor-parallel Transformer blocks.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tpsim/plan_json.hpp"
#include "tpsim/runner.hpp"
#include "tpsim/test_vectors.hpp"

namespace {

struct Common {
  std::string source = "tinyllama";
  std::string mode;
  std::string chips = "1";
  std::uint64_t seed = tpsim::kDefaultSeed;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* app, Common& c, const std::string& chips_help) {
  app->add_option("-p,--preset,--config", c.source,
                  "Preset name (tinyllama, mobilebert, tinyllama-scaled) or INI file")
      ->capture_default_str();
  app->add_option("-m,--mode", c.mode, "autoregressive or prompt");
  app->add_option("-c,--chips", c.chips, chips_help)->capture_default_str();
  app->add_option("--seed", c.seed, "RNG seed")->capture_default_str();
  app->add_option("-s,--set", c.overrides, "Override a constant, e.g. chip.l3_bandwidth=1e9");
}

tpsim::RunSpec to_spec(const Common& c) {
  tpsim::RunSpec spec;
  spec.source = c.source;
  if (!c.mode.empty()) {
    auto m = tpsim::parse_mode(c.mode);
    if (!m) throw tpsim::Error(tpsim::ErrorCode::kInvalidConfig, "unknown mode '" + c.mode + "'");
    spec.mode = *m;
  }
  spec.chips = tpsim::parse_chip_list(c.chips);
  spec.seed = c.seed;
  spec.overrides = c.overrides;
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor-parallel Transformer inference simulator"};
  app.require_subcommand(1);

  Common run_opts;
  std::string format = "csv";
  std::string series;
  std::string run_out;
  auto* run = app.add_subcommand("run", "Sweep chip counts and report latency and energy");
  add_common(run, run_opts, "Chip counts: list (1,2,4) or power-of-two range (1..64)");
  run->add_option("-f,--format", format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  run->add_option("--series", series, "Series label");
  run->add_option("-o,--output", run_out, "Output file (default stdout)");

  Common verify_opts;
  verify_opts.chips = "1,2,4,8";
  std::string fault;
  auto* verify = app.add_subcommand("verify", "Check partitioned against monolithic execution");
  add_common(verify, verify_opts, "Chip counts");
  verify->add_option("--inject-fault", fault, "Corrupt the plan before running")
      ->check(CLI::IsMember({"duplication"}));

  std::vector<std::string> report_in;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Merge run files into one CSV");
  report->add_option("inputs", report_in, "Run files (CSV or JSON)");
  report->add_option("-o,--output", report_out, "Output file (default stdout)");

  Common plan_opts;
  int fan_in = 4;
  auto* plan = app.add_subcommand("plan", "Print the partition plan as JSON");
  add_common(plan, plan_opts, "Chip count");
  plan->add_option("--fan-in", fan_in, "Reduce tree fan-in")->capture_default_str();

  Common vec_opts;
  std::string vec_dir = ".";
  std::string stem = "block";
  auto* vectors = app.add_subcommand("vectors", "Write reference input/output tensors");
  add_common(vectors, vec_opts, "Unused");
  vectors->add_option("-d,--dir", vec_dir, "Output directory")->capture_default_str();
  vectors->add_option("--stem", stem, "File stem")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto spec = to_spec(run_opts);
      spec.format = format == "json" ? tpsim::OutputFormat::kJson : tpsim::OutputFormat::kCsv;
      spec.series = series;
      std::optional<std::filesystem::path> out;
      if (!run_out.empty()) out = run_out;
      return tpsim::cmd_run(spec, out, std::cout, std::cerr);
    }
    if (*verify) {
      const auto f = fault.empty() ? tpsim::Fault::kNone : tpsim::Fault::kDuplicateShard;
      return tpsim::cmd_verify(to_spec(verify_opts), f, std::cout, std::cerr);
    }
    if (*report) {
      std::vector<std::filesystem::path> paths(report_in.begin(), report_in.end());
      std::optional<std::filesystem::path> out;
      if (!report_out.empty()) out = report_out;
      return tpsim::cmd_report(paths, out, std::cout, std::cerr);
    }
    if (*plan) {
      const auto spec = to_spec(plan_opts);
      const auto resolved = tpsim::resolve(spec);
      if (spec.chips.size() != 1) {
        throw tpsim::Error(tpsim::ErrorCode::kInvalidConfig, "plan takes a single chip count");
      }
      const auto p = tpsim::plan_partition(resolved.model, spec.chips.front(), fan_in);
      std::cout << tpsim::plan_to_json(p).dump(2) << '\n';
      return 0;
    }
    if (*vectors) {
      const auto resolved = tpsim::resolve(to_spec(vec_opts));
      const auto tv = tpsim::make_block_vectors(resolved.model, vec_opts.seed);
      tpsim::save_test_vectors(vec_dir, stem, tv);
      std::cout << (std::filesystem::path(vec_dir) / (stem + ".json")).string() << '\n';
      return 0;
    }
  } catch (const tpsim::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
