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


#include "tpsim/runner.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <variant>

#include <fmt/format.h>

#include "tpsim/exec.hpp"
#include "tpsim/partition.hpp"
#include "tpsim/plan_json.hpp"

namespace tpsim {
namespace {

int parse_positive(std::string_view s) {
  int v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || v < 1) {
    throw Error(ErrorCode::kInvalidConfig, fmt::format("bad chip count '{}'", s));
  }
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool is_preset(std::string_view name) {
  for (const auto& p : presets()) {
    if (p.name == name) return true;
  }
  return false;
}

using Cell = std::variant<std::monostate, std::string, double, std::int64_t, bool>;

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::string cell_csv(const Cell& c) {
  struct V {
    std::string operator()(std::monostate) const { return ""; }
    std::string operator()(const std::string& s) const { return csv_escape(s); }
    std::string operator()(double d) const { return format_number(d); }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
  };
  return std::visit(V{}, c);
}

nlohmann::json cell_json(const Cell& c) {
  struct V {
    nlohmann::json operator()(std::monostate) const { return nullptr; }
    nlohmann::json operator()(const std::string& s) const { return s; }
    nlohmann::json operator()(double d) const { return d; }
    nlohmann::json operator()(std::int64_t i) const { return i; }
    nlohmann::json operator()(bool b) const { return b; }
  };
  return std::visit(V{}, c);
}

std::vector<Cell> row_cells(const std::string& series, const RunRow& r) {
  const auto& p = r.point;
  std::vector<Cell> c;
  c.emplace_back(series);
  c.emplace_back(static_cast<std::int64_t>(p.n_chips));
  c.emplace_back(std::string(p.ok ? "ok" : "error"));
  if (!p.ok) {
    c.resize(run_columns().size());
    c.back() = p.error;
    return c;
  }
  const auto& b = p.breakdown;
  const auto& k = p.timeline->counters();
  const auto sum = [](const std::vector<std::int64_t>& v) {
    return std::accumulate(v.begin(), v.end(), std::int64_t{0});
  };
  c.emplace_back(p.makespan);
  c.emplace_back(p.speedup);
  c.emplace_back(b.compute);
  c.emplace_back(b.c2c);
  c.emplace_back(b.l2);
  c.emplace_back(b.l3);
  c.emplace_back(b.idle);
  c.emplace_back(k.c2c_messages);
  c.emplace_back(k.c2c_bytes);
  c.emplace_back(sum(k.l3_bytes));
  c.emplace_back(sum(k.l2_l1_bytes));
  c.emplace_back(k.macs);
  c.emplace_back(r.energy.totals.c2c);
  c.emplace_back(r.energy.totals.compute);
  c.emplace_back(r.energy.totals.l3_l2);
  c.emplace_back(r.energy.totals.l2_l1);
  c.emplace_back(r.energy.total_energy);
  c.emplace_back(r.energy.edp);
  c.emplace_back(p.residency.double_buffer);
  c.emplace_back(p.residency.all_blocks_resident);
  c.emplace_back(p.residency.resident_weight_bytes());
  c.emplace_back(p.residency.streamed_weight_bytes());
  c.emplace_back(p.residency.l2_footprint);
  c.emplace_back(std::monostate{});
  return c;
}

std::vector<std::pair<std::string, std::string>> model_entries(const ModelConfig& m) {
  return {{"model.S", std::to_string(m.seq_len)},
          {"model.E", std::to_string(m.embed_dim)},
          {"model.P", std::to_string(m.head_dim)},
          {"model.H", std::to_string(m.num_heads)},
          {"model.F", std::to_string(m.intermediate_dim)},
          {"model.L", std::to_string(m.num_blocks)},
          {"model.mode", std::string(to_string(m.mode))},
          {"model.bytes_per_elem", std::to_string(m.bytes_per_elem)},
          {"model.kv_cache_len", std::to_string(m.kv_cache_len)},
          {"model.causal", m.causal ? "true" : "false"},
          {"model.norm", std::string(to_string(m.norm))},
          {"model.gelu", std::string(to_string(m.gelu))}};
}

void write_output(const std::string& text, const std::optional<std::filesystem::path>& path,
                  std::ostream& out) {
  if (!path) {
    out << text;
    return;
  }
  std::ofstream f(*path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", path->string()));
  f << text;
  if (!f) throw Error(ErrorCode::kIo, fmt::format("write failed: {}", path->string()));
}

}  // namespace

std::vector<int> parse_chip_list(std::string_view text) {
  text = trim(text);
  if (text.empty()) throw Error(ErrorCode::kInvalidConfig, "empty chip list");
  std::vector<int> out;
  if (auto dots = text.find(".."); dots != std::string_view::npos) {
    const int lo = parse_positive(trim(text.substr(0, dots)));
    const int hi = parse_positive(trim(text.substr(dots + 2)));
    if (lo > hi) throw Error(ErrorCode::kInvalidConfig, fmt::format("empty range '{}'", text));
    for (long v = 1; v <= hi; v *= 2) {
      if (v >= lo) out.push_back(static_cast<int>(v));
    }
    if (out.empty()) {
      throw Error(ErrorCode::kInvalidConfig, fmt::format("no power of two in '{}'", text));
    }
    return out;
  }
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = trim(text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos));
    out.push_back(parse_positive(item));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

ResolvedRun resolve(const RunSpec& spec) {
  ResolvedRun run;
  if (is_preset(spec.source)) {
    run.name = spec.source;
    run.model = preset(spec.source, spec.mode);
    run.calibration = default_calibration();
  } else {
    auto path = resolve_config(spec.source);
    if (!path) {
      throw Error(ErrorCode::kIo, fmt::format("no preset or config file named '{}'", spec.source));
    }
    auto loaded = load_config(*path);
    run.name = loaded.name;
    run.model = loaded.model;
    run.calibration = loaded.calibration;
    if (spec.mode && *spec.mode != run.model.mode) {
      run.model.mode = *spec.mode;
      if (run.model.mode == Mode::kPrompt) run.model.kv_cache_len = run.model.seq_len;
    }
  }
  for (const auto& o : spec.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kInvalidConfig, fmt::format("override '{}' is not key=value", o));
    }
    const std::string key(trim(std::string_view(o).substr(0, eq)));
    const std::string value(trim(std::string_view(o).substr(eq + 1)));
    if (key.rfind("model.", 0) == 0) {
      set_model_field(run.model, key.substr(6), value);
    } else {
      set_calibration(run.calibration, key, value);
    }
  }
  ValidationResult v = validate(run.model);
  v.merge(validate(run.calibration.platform.chip));
  v.merge(validate(run.calibration.platform.link));
  v.merge(validate(run.calibration.energy));
  if (run.calibration.platform.fan_in < 2) v.violations.push_back("sim.fan_in >= 2");
  if (!v.ok()) throw Error(ErrorCode::kInvalidConfig, v.violations.front());
  run.series = spec.series.empty() ? fmt::format("{}/{}", run.name, to_string(run.model.mode))
                                   : spec.series;
  return run;
}

std::vector<RunRow> run_sweep(const ResolvedRun& run, const std::vector<int>& chips) {
  auto points = sweep(run.model, chips, run.calibration.platform);
  std::vector<RunRow> rows;
  rows.reserve(points.size());
  for (auto& p : points) {
    RunRow r;
    if (p.ok) {
      r.energy = energy_total(*p.timeline, run.calibration.energy);
      r.energy.edp = edp(r.energy, p.makespan);
    }
    r.point = std::move(p);
    rows.push_back(std::move(r));
  }
  return rows;
}

const std::vector<std::string>& run_columns() {
  static const std::vector<std::string> cols = {
      "series",          "n_chips",         "status",          "makespan_s",
      "speedup",         "compute_s",       "c2c_s",           "l2_s",
      "l3_s",            "idle_s",          "c2c_messages",    "c2c_bytes",
      "l3_bytes",        "l2_l1_bytes",     "macs",            "energy_c2c_j",
      "energy_compute_j", "energy_l3_l2_j", "energy_l2_l1_j",  "energy_total_j",
      "edp_js",          "double_buffer",   "all_blocks_resident", "resident_weight_bytes",
      "streamed_weight_bytes", "l2_footprint_bytes", "error"};
  return cols;
}

std::string render_csv(const ResolvedRun& run, const RunSpec& spec,
                       const std::vector<RunRow>& rows) {
  std::string out = "# tpsim run\n";
  out += fmt::format("# schema_version={}\n", kRunSchemaVersion);
  out += fmt::format("# series={}\n", run.series);
  out += fmt::format("# model.name={}\n", run.name);
  out += fmt::format("# seed={}\n", spec.seed);
  for (const auto& [k, v] : model_entries(run.model)) out += fmt::format("# {}={}\n", k, v);
  for (const auto& [k, v] : calibration_entries(run.calibration)) {
    out += fmt::format("# {}={}\n", k, v);
  }
  const auto& cols = run_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += '\n';
  for (const auto& r : rows) {
    const auto cells = row_cells(run.series, r);
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cell_csv(cells[i]);
    out += '\n';
  }
  return out;
}

nlohmann::json render_json(const ResolvedRun& run, const RunSpec& spec,
                           const std::vector<RunRow>& rows) {
  nlohmann::json constants = nlohmann::json::object();
  for (const auto& [k, v] : calibration_entries(run.calibration)) constants[k] = v;
  nlohmann::json table = nlohmann::json::array();
  const auto& cols = run_columns();
  for (const auto& r : rows) {
    const auto cells = row_cells(run.series, r);
    nlohmann::json obj = nlohmann::json::object();
    for (std::size_t i = 0; i < cols.size(); ++i) obj[cols[i]] = cell_json(cells[i]);
    table.push_back(std::move(obj));
  }
  return {{"schema_version", kRunSchemaVersion},
          {"tool", "tpsim"},
          {"series", run.series},
          {"name", run.name},
          {"seed", spec.seed},
          {"model", config_to_json(run.model)},
          {"constants", constants},
          {"columns", cols},
          {"rows", table}};
}

int cmd_run(const RunSpec& spec, const std::optional<std::filesystem::path>& out_path,
            std::ostream& out, std::ostream& err) {
  try {
    const auto run = resolve(spec);
    const auto rows = run_sweep(run, spec.chips);
    for (const auto& r : rows) {
      if (!r.point.ok) err << fmt::format("n={}: {}\n", r.point.n_chips, r.point.error);
    }
    const std::string text = spec.format == OutputFormat::kCsv
                                 ? render_csv(run, spec, rows)
                                 : render_json(run, spec, rows).dump(2) + "\n";
    write_output(text, out_path, out);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

std::vector<VerifyCase> verify_equivalence(const ModelConfig& cfg, const std::vector<int>& chips,
                                           std::uint64_t seed, Fault fault, int fan_in) {
  const auto w = random_block_weights(cfg, seed);
  const auto q = cfg.query_len();
  const Matrix x = random_matrix(q, cfg.embed_dim, seed + 1);

  const bool ar = cfg.mode == Mode::kAutoregressive;
  std::optional<KVCache> history;
  if (ar) {
    // Cache holds C - q earlier positions; the block appends the rest.
    history.emplace(cfg.head_dim, cfg.num_heads, cfg.kv_cache_len);
    const auto prior = cfg.kv_cache_len - q;
    if (prior > 0) {
      history->append(random_matrix(prior, cfg.proj_dim(), seed + 2),
                      random_matrix(prior, cfg.proj_dim(), seed + 3));
    }
  }
  std::optional<KVCache> mono_cache = history;
  const Matrix expected = run_block_monolithic(x, w, cfg, mono_cache ? &*mono_cache : nullptr);

  std::vector<VerifyCase> out;
  for (int n : chips) {
    VerifyCase vc;
    vc.n_chips = n;
    try {
      auto plan = plan_partition(cfg, n, fan_in);
      if (fault == Fault::kDuplicateShard) {
        if (n >= 2) {
          const auto dup = plan.shard(0, WeightTensor::kQuery);
          for (auto& s : plan.shards) {
            if (s.chip == 1 && s.tensor == WeightTensor::kQuery) {
              s.rows = dup.rows;
              s.cols = dup.cols;
            }
          }
        } else {
          plan.shards.push_back(plan.shard(0, WeightTensor::kQuery));
        }
      }
      const auto v = verify_plan(plan, cfg);
      if (!v.ok()) {
        std::string msg;
        for (const auto& s : v.violations) msg += (msg.empty() ? "" : "; ") + s;
        vc.message = msg;
        out.push_back(vc);
        continue;
      }
      std::vector<KVCache> caches;
      if (history) caches = split_cache(*history, plan);
      const Matrix got = run_block_partitioned(x, plan, w, cfg, caches);
      vc.max_rel_error = relative_error(got, expected);
      vc.ok = got.all_finite() && vc.max_rel_error <= kVerifyTolerance;
      if (!vc.ok) vc.message = "relative error above tolerance";
    } catch (const Error& e) {
      vc.message = e.what();
    }
    out.push_back(vc);
  }
  return out;
}

int cmd_verify(const RunSpec& spec, Fault fault, std::ostream& out, std::ostream& err) {
  ResolvedRun run;
  try {
    run = resolve(spec);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  const auto cases = verify_equivalence(run.model, spec.chips, spec.seed, fault,
                                        run.calibration.platform.fan_in);
  bool failed = false;
  bool config_error = false;
  for (const auto& c : cases) {
    if (c.ok) {
      out << fmt::format("n={} max_rel_error={:.3e} PASS\n", c.n_chips, c.max_rel_error);
      continue;
    }
    const bool is_config = c.message.rfind("Indivisible", 0) == 0 ||
                           c.message.rfind("InvalidConfig", 0) == 0;
    (is_config ? config_error : failed) = true;
    out << fmt::format("n={} {} {}\n", c.n_chips, is_config ? "ERROR" : "FAIL", c.message);
    err << fmt::format("n={}: {}\n", c.n_chips, c.message);
  }
  if (failed) return 1;
  return config_error ? 2 : 0;
}

int cmd_report(const std::vector<std::filesystem::path>& inputs,
               const std::optional<std::filesystem::path>& out_path, std::ostream& out,
               std::ostream& err) {
  if (inputs.empty()) {
    err << "error: report needs at least one run file\n";
    return 2;
  }
  try {
    std::string header;
    std::vector<std::string> lines;
    for (const auto& path : inputs) {
      std::ifstream f(path, std::ios::binary);
      if (!f) throw Error(ErrorCode::kIo, fmt::format("cannot read {}", path.string()));
      if (path.extension() == ".json") {
        nlohmann::json j;
        try {
          f >> j;
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorCode::kIo, fmt::format("{}: {}", path.string(), e.what()));
        }
        const auto& cols = run_columns();
        std::string h;
        for (std::size_t i = 0; i < cols.size(); ++i) h += (i ? "," : "") + cols[i];
        if (header.empty()) header = h;
        if (h != header) {
          throw Error(ErrorCode::kIo, fmt::format("{}: columns differ", path.string()));
        }
        for (const auto& row : j.at("rows")) {
          std::string line;
          for (std::size_t i = 0; i < cols.size(); ++i) {
            const auto& v = row.at(cols[i]);
            std::string s;
            if (v.is_null()) {
              s = "";
            } else if (v.is_string()) {
              s = csv_escape(v.get<std::string>());
            } else if (v.is_number_float()) {
              s = format_number(v.get<double>());
            } else {
              s = v.dump();
            }
            line += (i ? "," : "") + s;
          }
          lines.push_back(line);
        }
        continue;
      }
      std::string line;
      std::string h;
      while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (h.empty()) {
          h = line;
          if (h.rfind("series,", 0) != 0) {
            throw Error(ErrorCode::kIo, fmt::format("{}: not a run table", path.string()));
          }
          if (header.empty()) header = h;
          if (h != header) {
            throw Error(ErrorCode::kIo, fmt::format("{}: columns differ", path.string()));
          }
          continue;
        }
        lines.push_back(line);
      }
      if (h.empty()) throw Error(ErrorCode::kIo, fmt::format("{}: no table", path.string()));
    }
    std::string text = fmt::format("# tpsim report\n# schema_version={}\n", kRunSchemaVersion);
    text += header + '\n';
    for (const auto& l : lines) text += l + '\n';
    write_output(text, out_path, out);
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace tpsim
