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

#include "lagsim/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "lagsim/error.hpp"

namespace lagsim {
namespace {

void require_same_size(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": length mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
  }
}

void require_finite(std::span<const double> values, const char* op) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite entry");
  }
}

struct PowerResult {
  double estimate = 0.0;
  bool converged = false;
};

PowerResult power_iterate(const Matrix& g, std::vector<double> v, const PowerIterationOptions& opt) {
  const std::size_t n = g.rows();
  double norm = std::sqrt(dot(v, v));
  for (double& x : v) x /= norm;

  std::vector<double> w(n);
  PowerResult result;
  for (int it = 0; it < opt.max_iterations; ++it) {
    for (std::size_t r = 0; r < n; ++r) w[r] = dot(g.row(r), v);
    const double rho = dot(v, w);
    double residual = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double e = w[r] - rho * v[r];
      residual += e * e;
    }
    residual = std::sqrt(residual);
    result.estimate = rho;
    if (residual <= opt.rel_tolerance * std::abs(rho) || residual == 0.0) {
      result.converged = true;
      return result;
    }
    norm = std::sqrt(dot(w, w));
    for (std::size_t r = 0; r < n; ++r) v[r] = w[r] / norm;
  }
  return result;
}

// Two deterministic starts. The all-ones vector is the primary one; the
// harmonic vector covers matrices whose top eigenvector is orthogonal to it.
double top_eigenvalue(const Matrix& g, const PowerIterationOptions& opt, const char* op) {
  if (!g.is_square()) {
    throw DimensionError(std::string(op) + ": matrix is " + std::to_string(g.rows()) + "x" +
                         std::to_string(g.cols()) + ", expected square");
  }
  const std::size_t n = g.rows();
  if (n == 0) return 0.0;

  std::vector<double> harmonic(n);
  for (std::size_t i = 0; i < n; ++i) harmonic[i] = 1.0 / static_cast<double>(i + 1);

  const PowerResult ones = power_iterate(g, std::vector<double>(n, 1.0), opt);
  const PowerResult alt = power_iterate(g, std::move(harmonic), opt);
  const double best = std::max(ones.estimate, alt.estimate);
  if (!ones.converged || !alt.converged) {
    throw ToleranceError(std::string(op) + ": power iteration did not reach tolerance within " +
                             std::to_string(opt.max_iterations) + " iterations",
                         best);
  }
  return best;
}

}  // namespace

ModelVector::ModelVector(std::vector<double> entries) : entries_(std::move(entries)) {
  require_finite(entries_, "ModelVector");
}

ModelVector::ModelVector(std::initializer_list<double> entries) : entries_(entries) {
  require_finite(entries_, "ModelVector");
}

ModelVector ModelVector::constant(std::size_t dim, double value) {
  return ModelVector(std::vector<double>(dim, value));
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("Matrix: " + std::to_string(data_.size()) + " values for a " +
                         std::to_string(rows) + "x" + std::to_string(cols) + " shape");
  }
  require_finite(data_, "Matrix");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  require_finite(data_, "Matrix");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  require_finite(m.values(), "Matrix::diagonal");
  return m;
}

DataMatrix::DataMatrix(Matrix features, std::vector<double> labels)
    : features_(std::move(features)), labels_(std::move(labels)) {
  if (features_.rows() != labels_.size()) {
    throw DimensionError("DataMatrix: " + std::to_string(features_.rows()) + " rows but " +
                         std::to_string(labels_.size()) + " labels");
  }
  require_finite(labels_, "DataMatrix labels");
}

Matrix DataMatrix::gram() const {
  const std::size_t d = features_.cols();
  Matrix g(d, d);
  for (std::size_t n = 0; n < features_.rows(); ++n) {
    const auto x = features_.row(n);
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = x[i];
      if (xi == 0.0) continue;
      for (std::size_t j = i; j < d; ++j) g(i, j) += xi * x[j];
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
  return g;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double dot(const ModelVector& a, const ModelVector& b) { return dot(a.values(), b.values()); }

double sq_norm(const ModelVector& a) { return dot(a, a); }

ModelVector axpy(double alpha, const ModelVector& x, const ModelVector& y) {
  require_same_size(x.size(), y.size(), "axpy");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * x[i] + y[i];
  require_finite(out, "axpy");
  return ModelVector(std::move(out));
}

ModelVector operator+(const ModelVector& a, const ModelVector& b) { return axpy(1.0, a, b); }

ModelVector operator-(const ModelVector& a, const ModelVector& b) {
  require_same_size(a.size(), b.size(), "subtract");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  require_finite(out, "subtract");
  return ModelVector(std::move(out));
}

ModelVector operator*(double s, const ModelVector& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * a[i];
  require_finite(out, "scale");
  return ModelVector(std::move(out));
}

double sq_distance(const ModelVector& a, const ModelVector& b) {
  require_same_size(a.size(), b.size(), "sq_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = a[i] - b[i];
    s += e * e;
  }
  return s;
}

void add_in_place(ModelVector& y, const ModelVector& x) {
  require_same_size(x.size(), y.size(), "add_in_place");
  auto out = y.mutable_values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += x[i];
  require_finite(out, "add_in_place");
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("Matrix +: shape mismatch");
  std::vector<double> out(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.values()[i];
  return Matrix(a.rows(), a.cols(), std::move(out));
}

Matrix operator*(double s, const Matrix& a) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v *= s;
  return Matrix(a.rows(), a.cols(), std::move(out));
}

ModelVector operator*(const Matrix& a, const ModelVector& x) {
  require_same_size(a.cols(), x.size(), "matvec");
  std::vector<double> out(a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) out[r] = dot(a.row(r), x.values());
  return ModelVector(std::move(out));
}

double spectral_norm_sym(const Matrix& gram, const PowerIterationOptions& options) {
  return top_eigenvalue(gram, options, "spectral_norm_sym");
}

double smallest_eigenvalue_sym(const Matrix& gram, const PowerIterationOptions& options) {
  const double top = top_eigenvalue(gram, options, "smallest_eigenvalue_sym");
  const std::size_t n = gram.rows();
  Matrix shifted(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) shifted(i, j) = (i == j ? top : 0.0) - gram(i, j);
  const double spread = top_eigenvalue(shifted, options, "smallest_eigenvalue_sym");
  return std::max(0.0, top - spread);
}

}  // namespace lagsim
