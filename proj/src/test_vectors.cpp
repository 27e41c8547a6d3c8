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

#include "tpsim/test_vectors.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "tpsim/plan_json.hpp"

namespace tpsim {

static_assert(std::endian::native == std::endian::little, "blob layout assumes little-endian");

const Matrix* TestVectors::find(const std::string& name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return &m;
  }
  return nullptr;
}

const Matrix& TestVectors::at(const std::string& name) const {
  if (const Matrix* m = find(name)) return *m;
  throw Error(ErrorCode::kIo, fmt::format("test vectors lack tensor '{}'", name));
}

namespace {

Matrix as_row(const std::vector<double>& v) {
  return Matrix(1, static_cast<std::int64_t>(v.size()), v);
}

std::vector<double> row_values(const Matrix& m) {
  return {m.values().begin(), m.values().end()};
}

}  // namespace

TestVectors make_block_vectors(const ModelConfig& cfg, std::uint64_t seed) {
  TestVectors tv;
  tv.config = cfg;
  const BlockWeights w = random_block_weights(cfg, seed);
  const Matrix x = random_matrix(cfg.query_len(), cfg.embed_dim, seed + 100);
  tv.tensors.emplace_back("x", x);
  for (auto t : kWeightTensors) tv.tensors.emplace_back(std::string(to_string(t)), w.tensor(t));
  tv.tensors.emplace_back("norm1_gain", as_row(w.norm1_gain));
  tv.tensors.emplace_back("norm2_gain", as_row(w.norm2_gain));
  tv.tensors.emplace_back("expected", run_block_monolithic(x, w, cfg));
  return tv;
}

BlockWeights weights_from_vectors(const TestVectors& tv) {
  BlockWeights w;
  w.w_query = tv.at("W_query");
  w.w_key = tv.at("W_key");
  w.w_value = tv.at("W_value");
  w.w_out = tv.at("W_O");
  w.w_fc1 = tv.at("W_L1");
  w.w_fc2 = tv.at("W_L2");
  w.norm1_gain = row_values(tv.at("norm1_gain"));
  w.norm2_gain = row_values(tv.at("norm2_gain"));
  return w;
}

void save_test_vectors(const std::filesystem::path& dir, const std::string& stem,
                       const TestVectors& tv) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto bin_path = dir / (stem + ".bin");
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", bin_path.string()));

  nlohmann::json tensors = nlohmann::json::array();
  std::int64_t offset = 0;
  for (const auto& [name, m] : tv.tensors) {
    const auto vals = m.values();
    bin.write(reinterpret_cast<const char*>(vals.data()),
              static_cast<std::streamsize>(vals.size() * sizeof(double)));
    tensors.push_back({{"name", name},
                       {"shape", {m.rows(), m.cols()}},
                       {"offset", offset},
                       {"count", m.size()}});
    offset += m.size() * static_cast<std::int64_t>(sizeof(double));
  }
  if (!bin) throw Error(ErrorCode::kIo, fmt::format("short write to {}", bin_path.string()));

  const nlohmann::json manifest = {{"format", "tpsim-test-vectors"},
                                   {"schema_version", 1},
                                   {"dtype", "float64"},
                                   {"byte_order", "little"},
                                   {"binary", stem + ".bin"},
                                   {"config", config_to_json(tv.config)},
                                   {"tensors", tensors}};
  const auto json_path = dir / (stem + ".json");
  std::ofstream js(json_path);
  if (!js) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", json_path.string()));
  js << manifest.dump(2) << '\n';
}

TestVectors load_test_vectors(const std::filesystem::path& manifest_path) {
  std::ifstream js(manifest_path);
  if (!js) throw Error(ErrorCode::kIo, fmt::format("cannot read {}", manifest_path.string()));
  nlohmann::json manifest;
  try {
    js >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, fmt::format("bad manifest {}: {}", manifest_path.string(), e.what()));
  }

  TestVectors tv;
  try {
    if (manifest.at("format") != "tpsim-test-vectors" || manifest.at("dtype") != "float64") {
      throw Error(ErrorCode::kIo, "unsupported test-vector format");
    }
    tv.config = config_from_json(manifest.at("config"));
    const auto bin_path = manifest_path.parent_path() / manifest.at("binary").get<std::string>();
    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw Error(ErrorCode::kIo, fmt::format("cannot read {}", bin_path.string()));
    for (const auto& t : manifest.at("tensors")) {
      const auto rows = t.at("shape").at(0).get<std::int64_t>();
      const auto cols = t.at("shape").at(1).get<std::int64_t>();
      const auto count = t.at("count").get<std::int64_t>();
      if (count != rows * cols) throw Error(ErrorCode::kIo, "tensor count != product of shape");
      std::vector<double> vals(static_cast<std::size_t>(count));
      bin.seekg(t.at("offset").get<std::streamoff>());
      bin.read(reinterpret_cast<char*>(vals.data()),
               static_cast<std::streamsize>(vals.size() * sizeof(double)));
      if (!bin) throw Error(ErrorCode::kIo, fmt::format("truncated blob {}", bin_path.string()));
      tv.tensors.emplace_back(t.at("name").get<std::string>(), Matrix(rows, cols, std::move(vals)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, fmt::format("bad manifest {}: {}", manifest_path.string(), e.what()));
  }
  return tv;
}

}  // namespace tpsim
