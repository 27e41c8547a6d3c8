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
#include <span>
#include <vector>

namespace tpsim {

/// Dense row-major matrix of doubles. Activations and weights are all 2-D
/// (rows x cols), so this is the only tensor type the executors need.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::int64_t rows, std::int64_t cols, double fill = 0.0);
  /// Throws Error(kShapeMismatch) if values.size() != rows * cols.
  Matrix(std::int64_t rows, std::int64_t cols, std::vector<double> values);

  std::int64_t rows() const { return rows_; }
  std::int64_t cols() const { return cols_; }
  std::int64_t size() const { return rows_ * cols_; }

  double& operator()(std::int64_t r, std::int64_t c) { return data_[index(r, c)]; }
  double operator()(std::int64_t r, std::int64_t c) const { return data_[index(r, c)]; }

  std::span<double> row(std::int64_t r) {
    return {data_.data() + r * cols_, static_cast<std::size_t>(cols_)};
  }
  std::span<const double> row(std::int64_t r) const {
    return {data_.data() + r * cols_, static_cast<std::size_t>(cols_)};
  }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  /// Copy of rows [r0, r1) x cols [c0, c1).
  Matrix block(std::int64_t r0, std::int64_t r1, std::int64_t c0, std::int64_t c1) const;
  void set_block(std::int64_t r0, std::int64_t c0, const Matrix& src);

  bool all_finite() const;
  bool operator==(const Matrix&) const = default;

 private:
  std::size_t index(std::int64_t r, std::int64_t c) const {
    return static_cast<std::size_t>(r * cols_ + c);
  }

  std::int64_t rows_ = 0;
  std::int64_t cols_ = 0;
  std::vector<double> data_;
};

double max_abs(const Matrix& m);
/// max |a - b|; throws Error(kShapeMismatch) on shape mismatch.
double max_abs_diff(const Matrix& a, const Matrix& b);
/// max|a - b| / (max|b| + eps).
double relative_error(const Matrix& a, const Matrix& reference, double eps = 1e-30);

}  // namespace tpsim
