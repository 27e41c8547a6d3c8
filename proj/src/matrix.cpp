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

#include "tpsim/matrix.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tpsim/error.hpp"

namespace tpsim {

Matrix::Matrix(std::int64_t rows, std::int64_t cols, double fill)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols), fill) {
  if (rows < 0 || cols < 0) {
    throw Error(ErrorCode::kShapeMismatch, fmt::format("negative shape {}x{}", rows, cols));
  }
}

Matrix::Matrix(std::int64_t rows, std::int64_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (rows < 0 || cols < 0 || static_cast<std::int64_t>(data_.size()) != rows * cols) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("{} values for a {}x{} matrix", data_.size(), rows, cols));
  }
}

Matrix Matrix::block(std::int64_t r0, std::int64_t r1, std::int64_t c0, std::int64_t c1) const {
  if (r0 < 0 || c0 < 0 || r1 > rows_ || c1 > cols_ || r1 < r0 || c1 < c0) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("block [{},{})x[{},{}) outside {}x{}", r0, r1, c0, c1, rows_, cols_));
  }
  Matrix out(r1 - r0, c1 - c0);
  for (std::int64_t r = r0; r < r1; ++r) {
    const auto src = row(r).subspan(static_cast<std::size_t>(c0), static_cast<std::size_t>(c1 - c0));
    std::copy(src.begin(), src.end(), out.row(r - r0).begin());
  }
  return out;
}

void Matrix::set_block(std::int64_t r0, std::int64_t c0, const Matrix& src) {
  if (r0 < 0 || c0 < 0 || r0 + src.rows() > rows_ || c0 + src.cols() > cols_) {
    throw Error(ErrorCode::kShapeMismatch, "set_block outside destination");
  }
  for (std::int64_t r = 0; r < src.rows(); ++r) {
    std::copy(src.row(r).begin(), src.row(r).end(),
              row(r0 + r).begin() + static_cast<std::ptrdiff_t>(c0));
  }
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double max_abs(const Matrix& m) {
  double best = 0.0;
  for (double v : m.values()) best = std::max(best, std::abs(v));
  return best;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("{}x{} vs {}x{}", a.rows(), a.cols(), b.rows(), b.cols()));
  }
  double best = 0.0;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) best = std::max(best, std::abs(av[i] - bv[i]));
  return best;
}

double relative_error(const Matrix& a, const Matrix& reference, double eps) {
  return max_abs_diff(a, reference) / (max_abs(reference) + eps);
}

}  // namespace tpsim
