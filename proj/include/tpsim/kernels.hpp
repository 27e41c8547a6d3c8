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

#include <span>
#include <vector>

#include "tpsim/matrix.hpp"
#include "tpsim/model.hpp"

// Numerical kernels for the block executors.
//
// The functions in tpsim::kernels are OpenMP-parallel. Those in
// tpsim::kernels::reference are plain serial loops kept as the test oracle.
// Both accumulate every dot product in ascending k order, so their results
// are bitwise identical.
namespace tpsim::kernels {

inline constexpr double kNormEps = 1e-5;

/// a (M x K) * b (K x N). Throws Error(kShapeMismatch).
Matrix matmul(const Matrix& a, const Matrix& b);
/// a (M x K) * b^T, b is (N x K).
Matrix matmul_transposed(const Matrix& a, const Matrix& b);

/// In-place, max-subtracted softmax over one row.
void softmax_row(std::span<double> x);
std::vector<double> softmax(std::span<const double> x);
void softmax_rows(Matrix& m);

double gelu(double x, GeluKind kind = GeluKind::kErf);
void gelu_inplace(Matrix& m, GeluKind kind = GeluKind::kErf);

/// Row-wise normalization scaled by `gain`; an empty gain means unit gain.
void norm_row(std::span<double> x, std::span<const double> gain, NormKind kind,
              double eps = kNormEps);
void norm_rows(Matrix& m, std::span<const double> gain, NormKind kind, double eps = kNormEps);

/// acc += x, elementwise.
void add_inplace(Matrix& acc, const Matrix& x);

namespace reference {

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_transposed(const Matrix& a, const Matrix& b);
void softmax_rows(Matrix& m);
void gelu_inplace(Matrix& m, GeluKind kind = GeluKind::kErf);
void norm_rows(Matrix& m, std::span<const double> gain, NormKind kind, double eps = kNormEps);
void add_inplace(Matrix& acc, const Matrix& x);

}  // namespace reference
}  // namespace tpsim::kernels
