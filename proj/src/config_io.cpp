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


#include "tpsim/config_io.hpp"

#include <charconv>
#include <cstdlib>
#include <functional>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

namespace tpsim {
namespace {

double parse_double(std::string_view key, std::string_view v) {
  try {
    std::size_t pos = 0;
    const std::string s(v);
    const double d = std::stod(s, &pos);
    if (pos == s.size()) return d;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kInvalidConfig, fmt::format("{}: not a number: '{}'", key, v));
}

std::int64_t parse_int(std::string_view key, std::string_view v) {
  std::int64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    // Accept integral values written in floating form, e.g. 5e8.
    const double d = parse_double(key, v);
    if (d != static_cast<double>(static_cast<std::int64_t>(d))) {
      throw Error(ErrorCode::kInvalidConfig, fmt::format("{}: not an integer: '{}'", key, v));
    }
    return static_cast<std::int64_t>(d);
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::kInvalidConfig, fmt::format("{}: not a boolean: '{}'", key, v));
}

struct Field {
  const char* key;
  std::function<std::string(const Calibration&)> get;
  std::function<void(Calibration&, std::string_view key, std::string_view)> set;
};

#define TPSIM_DOUBLE(name, expr)                                                        \
  Field {                                                                               \
    name, [](const Calibration& c) { return format_number(c.expr); },                  \
        [](Calibration& c, std::string_view k, std::string_view v) { c.expr = parse_double(k, v); } \
  }
#define TPSIM_INT(name, expr)                                                           \
  Field {                                                                               \
    name, [](const Calibration& c) { return std::to_string(c.expr); },                 \
        [](Calibration& c, std::string_view k, std::string_view v) {                    \
          c.expr = static_cast<decltype(c.expr)>(parse_int(k, v));                      \
        }                                                                               \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      TPSIM_INT("chip.cores", platform.chip.cores),
      TPSIM_DOUBLE("chip.clock_hz", platform.chip.clock_hz),
      TPSIM_DOUBLE("chip.macs_per_cycle", platform.chip.macs_per_core_per_cycle),
      TPSIM_INT("chip.l1_bytes", platform.chip.l1_bytes),
      TPSIM_INT("chip.l2_bytes", platform.chip.l2_bytes),
      TPSIM_DOUBLE("chip.l1_bandwidth_bits", platform.chip.l1_bandwidth_bits),
      TPSIM_DOUBLE("chip.l3_bandwidth", platform.chip.l3_bandwidth),
      TPSIM_INT("chip.staging_bytes", platform.chip.staging_bytes),
      TPSIM_DOUBLE("link.bandwidth", platform.link.bandwidth),
      TPSIM_DOUBLE("link.latency", platform.link.latency),
      Field{"link.energy_per_byte",
            [](const Calibration& c) { return format_number(c.platform.link.energy_per_byte); },
            [](Calibration& c, std::string_view k, std::string_view v) {
              c.platform.link.energy_per_byte = parse_double(k, v);
              c.energy.e_c2c = c.platform.link.energy_per_byte;
            }},
      TPSIM_DOUBLE("efficiency.u_max", platform.efficiency.u_max),
      TPSIM_DOUBLE("efficiency.k_half", platform.efficiency.k_half),
      TPSIM_INT("efficiency.overhead_cycles", platform.efficiency.fixed_overhead_cycles),
      TPSIM_DOUBLE("efficiency.softmax_ops", platform.efficiency.softmax_ops),
      TPSIM_DOUBLE("efficiency.gelu_ops", platform.efficiency.gelu_ops),
      TPSIM_DOUBLE("efficiency.norm_ops", platform.efficiency.norm_ops),
      TPSIM_DOUBLE("efficiency.add_ops", platform.efficiency.elementwise_ops),
      Field{"energy.e_c2c", [](const Calibration& c) { return format_number(c.energy.e_c2c); },
            [](Calibration& c, std::string_view k, std::string_view v) {
              c.energy.e_c2c = parse_double(k, v);
              c.platform.link.energy_per_byte = c.energy.e_c2c;
            }},
      TPSIM_DOUBLE("energy.e_l3_l2", energy.e_l3_l2),
      TPSIM_DOUBLE("energy.e_l2_l1", energy.e_l2_l1),
      TPSIM_DOUBLE("energy.core_power", energy.core_power),
      TPSIM_INT("energy.cores_per_chip", energy.cores_per_chip),
      Field{"sim.prefetch",
            [](const Calibration& c) {
              return std::string(to_string(c.platform.options.prefetch));
            },
            [](Calibration& c, std::string_view k, std::string_view v) {
              auto p = parse_prefetch_model(v);
              if (!p) {
                throw Error(ErrorCode::kInvalidConfig,
                            fmt::format("{}: expected hide-resident or strict, got '{}'", k, v));
              }
              c.platform.options.prefetch = *p;
            }},
      Field{"sim.charge_l2_time",
            [](const Calibration& c) {
              return std::string(c.platform.options.charge_l2_time ? "true" : "false");
            },
            [](Calibration& c, std::string_view k, std::string_view v) {
              c.platform.options.charge_l2_time = parse_bool(k, v);
            }},
      TPSIM_INT("sim.fan_in", platform.fan_in),
  };
  return f;
}

#undef TPSIM_DOUBLE
#undef TPSIM_INT

}  // namespace

std::string format_number(double v) { return fmt::format("{}", v); }

Calibration default_calibration() {
  Calibration c;
  c.energy.e_c2c = c.platform.link.energy_per_byte;
  return c;
}

void set_calibration(Calibration& c, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(c, key, value);
      return;
    }
  }
  throw Error(ErrorCode::kInvalidConfig, fmt::format("unknown constant '{}'", key));
}

std::vector<std::pair<std::string, std::string>> calibration_entries(const Calibration& c) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(c));
  return out;
}

void set_model_field(ModelConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "S") {
    cfg.seq_len = parse_int(key, value);
  } else if (key == "E") {
    cfg.embed_dim = parse_int(key, value);
  } else if (key == "P") {
    cfg.head_dim = parse_int(key, value);
  } else if (key == "H") {
    cfg.num_heads = parse_int(key, value);
  } else if (key == "F") {
    cfg.intermediate_dim = parse_int(key, value);
  } else if (key == "L") {
    cfg.num_blocks = parse_int(key, value);
  } else if (key == "bytes_per_elem") {
    cfg.bytes_per_elem = parse_int(key, value);
  } else if (key == "kv_cache_len") {
    cfg.kv_cache_len = parse_int(key, value);
  } else if (key == "causal") {
    cfg.causal = parse_bool(key, value);
  } else if (key == "mode") {
    auto m = parse_mode(value);
    if (!m) throw Error(ErrorCode::kInvalidConfig, fmt::format("mode: unknown '{}'", value));
    cfg.mode = *m;
  } else if (key == "norm") {
    auto n = parse_norm(value);
    if (!n) throw Error(ErrorCode::kInvalidConfig, fmt::format("norm: unknown '{}'", value));
    cfg.norm = *n;
  } else if (key == "gelu") {
    auto g = parse_gelu(value);
    if (!g) throw Error(ErrorCode::kInvalidConfig, fmt::format("gelu: unknown '{}'", value));
    cfg.gelu = *g;
  } else {
    throw Error(ErrorCode::kInvalidConfig, fmt::format("unknown model field '{}'", key));
  }
}

LoadedConfig load_config(const std::filesystem::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::kIo, fmt::format("{}: {}", path.string(), e.message()));
  }

  LoadedConfig out;
  out.name = path.stem().string();
  out.calibration = default_calibration();

  std::optional<Mode> mode;
  std::string base = "tinyllama";
  if (auto model = tree.get_child_optional("model")) {
    if (auto m = model->get_optional<std::string>("mode")) {
      mode = parse_mode(*m);
      if (!mode) throw Error(ErrorCode::kInvalidConfig, fmt::format("mode: unknown '{}'", *m));
    }
    base = model->get<std::string>("preset", base);
    out.name = model->get<std::string>("name", out.name);
  }
  out.model = preset(base, mode);

  for (const auto& [section, body] : tree) {
    if (section == "model") {
      for (const auto& [key, value] : body) {
        if (key == "preset" || key == "name") continue;
        set_model_field(out.model, key, value.data());
      }
    } else {
      for (const auto& [key, value] : body) {
        set_calibration(out.calibration, section + "." + key, value.data());
      }
    }
  }
  // The cache spans the sequence unless sized explicitly.
  const auto model = tree.get_child_optional("model");
  if (!model || !model->get_optional<std::string>("kv_cache_len")) {
    out.model.kv_cache_len = out.model.seq_len;
  }
  return out;
}

std::filesystem::path default_config_dir() {
  if (const char* dir = std::getenv("TPSIM_CONFIG_DIR"); dir && *dir) return dir;
  return "configs";
}

std::optional<std::filesystem::path> resolve_config(std::string_view name) {
  namespace fs = std::filesystem;
  const fs::path given(name);
  if (fs::is_regular_file(given)) return given;
  const fs::path dir = default_config_dir();
  for (const auto& candidate : {dir / given, dir / fs::path(std::string(name) + ".ini")}) {
    if (fs::is_regular_file(candidate)) return candidate;
  }
  return std::nullopt;
}

}  // namespace tpsim
