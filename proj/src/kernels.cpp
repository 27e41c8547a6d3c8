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

#include "tpsim/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "tpsim/error.hpp"

namespace tpsim::kernels {
namespace {

constexpr std::int64_t kColBlock = 64;

void check_matmul(const Matrix& a, const Matrix& b, bool transposed) {
  const std::int64_t inner_b = transposed ? b.cols() : b.rows();
  if (a.cols() != inner_b) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("matmul inner dims {}x{} * {}{}x{}", a.rows(), a.cols(),
                            transposed ? "T " : "", b.rows(), b.cols()));
  }
}

void check_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("{}x{} vs {}x{}", a.rows(), a.cols(), b.rows(), b.cols()));
  }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_matmul(a, b, false);
  const std::int64_t m = a.rows();
  const std::int64_t n = b.cols();
  const std::int64_t k = a.cols();
  Matrix c(m, n);
  const std::int64_t col_blocks = (n + kColBlock - 1) / kColBlock;

  // i-k-j order inside a column block: each c(i, j) still sums k ascending.
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t jb = 0; jb < col_blocks; ++jb) {
      const std::int64_t j0 = jb * kColBlock;
      const std::int64_t j1 = std::min(n, j0 + kColBlock);
      double* crow = &c(i, 0);
      for (std::int64_t kk = 0; kk < k; ++kk) {
        const double aik = a(i, kk);
        const double* brow = b.values().data() + kk * n;
        for (std::int64_t j = j0; j < j1; ++j) crow[j] += aik * brow[j];
      }
    }
  }
  return c;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  check_matmul(a, b, true);
  const std::int64_t m = a.rows();
  const std::int64_t n = b.rows();
  const std::int64_t k = a.cols();
  Matrix c(m, n);
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::int64_t kk = 0; kk < k; ++kk) acc += a(i, kk) * b(j, kk);
      c(i, j) = acc;
    }
  }
  return c;
}

void softmax_row(std::span<double> x) {
  if (x.empty()) return;
  const double mx = *std::max_element(x.begin(), x.end());
  double sum = 0.0;
  for (double& v : x) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : x) v /= sum;
}

std::vector<double> softmax(std::span<const double> x) {
  std::vector<double> out(x.begin(), x.end());
  softmax_row(out);
  return out;
}

void softmax_rows(Matrix& m) {
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < m.rows(); ++r) softmax_row(m.row(r));
}

double gelu(double x, GeluKind kind) {
  if (kind == GeluKind::kErf) return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
  constexpr double kC = 0.7978845608028654;  // sqrt(2 / pi)
  return 0.5 * x * (1.0 + std::tanh(kC * (x + 0.044715 * x * x * x)));
}

void gelu_inplace(Matrix& m, GeluKind kind) {
  auto v = m.values();
  const auto n = static_cast<std::int64_t>(v.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = gelu(v[static_cast<std::size_t>(i)], kind);
}

void norm_row(std::span<double> x, std::span<const double> gain, NormKind kind, double eps) {
  if (x.empty()) return;
  if (!gain.empty() && gain.size() != x.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("norm gain has {} entries for a row of {}", gain.size(), x.size()));
  }
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  if (kind == NormKind::kLayerNorm) {
    for (double v : x) mean += v;
    mean /= n;
  }
  double sq = 0.0;
  for (double v : x) sq += (v - mean) * (v - mean);
  const double inv = 1.0 / std::sqrt(sq / n + eps);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = (x[i] - mean) * inv;
    if (!gain.empty()) x[i] *= gain[i];
  }
}

void norm_rows(Matrix& m, std::span<const double> gain, NormKind kind, double eps) {
  if (!gain.empty() && static_cast<std::int64_t>(gain.size()) != m.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "norm gain length != row length");
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < m.rows(); ++r) norm_row(m.row(r), gain, kind, eps);
}

void add_inplace(Matrix& acc, const Matrix& x) {
  check_same_shape(acc, x);
  auto a = acc.values();
  const auto b = x.values();
  const auto n = static_cast<std::int64_t>(a.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] += b[static_cast<std::size_t>(i)];
}

namespace reference {

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_matmul(a, b, false);
  Matrix c(a.rows(), b.cols());
  for (std::int64_t i = 0; i < a.rows(); ++i) {
    for (std::int64_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::int64_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      c(i, j) = acc;
    }
  }
  return c;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  check_matmul(a, b, true);
  Matrix c(a.rows(), b.rows());
  for (std::int64_t i = 0; i < a.rows(); ++i) {
    for (std::int64_t j = 0; j < b.rows(); ++j) {
      double acc = 0.0;
      for (std::int64_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(j, k);
      c(i, j) = acc;
    }
  }
  return c;
}

void softmax_rows(Matrix& m) {
  for (std::int64_t r = 0; r < m.rows(); ++r) kernels::softmax_row(m.row(r));
}

void gelu_inplace(Matrix& m, GeluKind kind) {
  for (double& v : m.values()) v = kernels::gelu(v, kind);
}

void norm_rows(Matrix& m, std::span<const double> gain, NormKind kind, double eps) {
  for (std::int64_t r = 0; r < m.rows(); ++r) kernels::norm_row(m.row(r), gain, kind, eps);
}

void add_inplace(Matrix& acc, const Matrix& x) {
  check_same_shape(acc, x);
  auto a = acc.values();
  const auto b = x.values();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace reference
}  // namespace tpsim::kernels
