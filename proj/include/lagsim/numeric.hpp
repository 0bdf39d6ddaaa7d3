// Copyright 2026 The lagsim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

// Dense vector and matrix kernels shared by every other module.

#ifndef LAGSIM_NUMERIC_HPP_
#define LAGSIM_NUMERIC_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace lagsim {

/// Dense real vector of fixed length d. Holds model parameters and gradients.
///
/// Entries are always finite: construction rejects NaN/Inf and every
/// arithmetic routine in this header re-checks its output.
class ModelVector {
 public:
  ModelVector() = default;
  explicit ModelVector(std::size_t dim) : entries_(dim, 0.0) {}
  explicit ModelVector(std::vector<double> entries);
  ModelVector(std::initializer_list<double> entries);

  static ModelVector zeros(std::size_t dim) { return ModelVector(dim); }
  static ModelVector constant(std::size_t dim, double value);

  std::size_t size() const noexcept { return entries_.size(); }
  double operator[](std::size_t i) const { return entries_[i]; }
  std::span<const double> values() const noexcept { return entries_; }

  // Raw write access for kernels. Callers must keep entries finite.
  std::span<double> mutable_values() noexcept { return entries_; }

  bool operator==(const ModelVector&) const = default;

 private:
  std::vector<double> entries_;
};

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool is_square() const noexcept { return rows_ == cols_; }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }
  std::span<const double> values() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// n samples of d features plus one label per sample.
class DataMatrix {
 public:
  DataMatrix() = default;
  DataMatrix(Matrix features, std::vector<double> labels);

  std::size_t samples() const noexcept { return features_.rows(); }
  std::size_t features_dim() const noexcept { return features_.cols(); }
  const Matrix& features() const noexcept { return features_; }
  std::span<const double> labels() const noexcept { return labels_; }

  // XᵀX, d×d.
  Matrix gram() const;

  bool operator==(const DataMatrix&) const = default;

 private:
  Matrix features_;
  std::vector<double> labels_;
};

double dot(const ModelVector& a, const ModelVector& b);
double dot(std::span<const double> a, std::span<const double> b);
double sq_norm(const ModelVector& a);

/// Returns alpha*x + y.
ModelVector axpy(double alpha, const ModelVector& x, const ModelVector& y);

ModelVector operator+(const ModelVector& a, const ModelVector& b);
ModelVector operator-(const ModelVector& a, const ModelVector& b);
ModelVector operator*(double s, const ModelVector& a);

// Squared distance ‖a − b‖², without materializing the difference.
double sq_distance(const ModelVector& a, const ModelVector& b);

// In-place y += x, for accumulation loops.
void add_in_place(ModelVector& y, const ModelVector& x);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
ModelVector operator*(const Matrix& a, const ModelVector& x);

struct PowerIterationOptions {
  double rel_tolerance = 1e-10;
  int max_iterations = 10'000;
};

/// Largest eigenvalue of a symmetric positive-semidefinite matrix.
///
/// Power iteration from the normalized all-ones vector. Stops when the
/// eigen-residual ‖Gv − ρv‖ falls below rel_tolerance·ρ, which bounds the
/// distance from ρ to the spectrum by the same amount. Throws DimensionError
/// for non-square input and ToleranceError (carrying the last Rayleigh
/// quotient) when the iteration cap is hit.
double spectral_norm_sym(const Matrix& gram, const PowerIterationOptions& options = {});

/// Smallest eigenvalue of a symmetric PSD matrix, via power iteration on
/// λ_max·I − G.
double smallest_eigenvalue_sym(const Matrix& gram, const PowerIterationOptions& options = {});

}  // namespace lagsim

#endif  // LAGSIM_NUMERIC_HPP_
