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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lagsim/error.hpp"
#include "test_util.hpp"

namespace lagsim {
namespace {

TEST(ModelVectorTest, RejectsNonFiniteEntries) {
  EXPECT_THROW(ModelVector({1.0, std::nan("")}), NumericError);
  EXPECT_THROW(ModelVector({INFINITY}), NumericError);
}

TEST(ModelVectorTest, DotAndNorm) {
  EXPECT_DOUBLE_EQ(dot(ModelVector{1, 2, 3}, ModelVector{4, 5, 6}), 32.0);
  EXPECT_DOUBLE_EQ(sq_norm(ModelVector{3, 4}), 25.0);
  EXPECT_THROW(dot(ModelVector{1}, ModelVector{1, 2}), DimensionError);
}

TEST(ModelVectorTest, AxpyExamples) {
  EXPECT_EQ(axpy(2.0, ModelVector{1, 0}, ModelVector{0, 1}), (ModelVector{2, 1}));
  const ModelVector x{1.5, -2, 7};
  const ModelVector y{4, 5, 6};
  EXPECT_EQ(axpy(0.0, x, y), y);
  EXPECT_EQ(axpy(-1.0, x, x), ModelVector::zeros(3));
  EXPECT_THROW(axpy(1.0, ModelVector{1}, ModelVector{1, 2}), DimensionError);
}

TEST(ModelVectorTest, AxpyIsExactOnIntegers) {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<int> pick(-1000, 1000);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(5), b(5);
    for (int i = 0; i < 5; ++i) {
      a[i] = pick(gen);
      b[i] = pick(gen);
    }
    const int alpha = pick(gen);
    const ModelVector r = axpy(alpha, ModelVector(a), ModelVector(b));
    for (int i = 0; i < 5; ++i) EXPECT_EQ(r[i], alpha * a[i] + b[i]);
  }
}

TEST(ModelVectorTest, AxpyOverflowIsNumericError) {
  EXPECT_THROW(axpy(1e308, ModelVector{1e308}, ModelVector{0}), NumericError);
}

TEST(ModelVectorTest, CauchySchwarz) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = testing::random_vector(gen, 7);
    const auto b = testing::random_vector(gen, 7);
    const double d = dot(a, b);
    EXPECT_LE(d * d, sq_norm(a) * sq_norm(b) * (1 + 1e-12));
  }
}

TEST(ModelVectorTest, SqDistanceMatchesDifference) {
  const ModelVector a{1, 2, 3};
  const ModelVector b{-1, 0, 5};
  EXPECT_DOUBLE_EQ(sq_distance(a, b), sq_norm(a - b));
  EXPECT_DOUBLE_EQ(sq_distance(a, b), 12.0);
}

TEST(MatrixTest, GramAndProduct) {
  const DataMatrix data(Matrix{{1, 0}, {1, 1}}, {0, 0});
  EXPECT_EQ(data.gram(), (Matrix{{2, 1}, {1, 1}}));
  EXPECT_EQ(Matrix({{1, 2}, {3, 4}}) * ModelVector({1, 1}), (ModelVector{3, 7}));
  EXPECT_THROW(DataMatrix(Matrix{{1, 0}}, {0, 0}), DimensionError);
}

TEST(SpectralNormTest, ClosedFormCases) {
  const std::vector<double> diag{1, 2, 3};
  EXPECT_NEAR(spectral_norm_sym(Matrix::diagonal(diag)), 3.0, 3e-10);
  EXPECT_NEAR(spectral_norm_sym(Matrix::identity(5)), 1.0, 1e-10);
  EXPECT_NEAR(spectral_norm_sym(Matrix{{2, 1}, {1, 2}}), 3.0, 3e-10);
}

TEST(SpectralNormTest, NonSquareIsDimensionError) {
  EXPECT_THROW(spectral_norm_sym(Matrix(2, 3)), DimensionError);
}

TEST(SpectralNormTest, StartOrthogonalToAllOnes) {
  // Top eigenvector (1,−1)/√2 is orthogonal to the all-ones start.
  EXPECT_NEAR(spectral_norm_sym(Matrix{{2, -1}, {-1, 2}}), 3.0, 3e-10);
}

TEST(SpectralNormTest, IterationCapCarriesEstimate) {
  // Two nearly equal top eigenvalues converge slowly.
  const std::vector<double> diag{1.0, 0.999999, 0.5};
  try {
    spectral_norm_sym(Matrix::diagonal(diag), {1e-14, 3});
    FAIL() << "expected ToleranceError";
  } catch (const ToleranceError& e) {
    EXPECT_GT(e.best_estimate(), 0.5);
    EXPECT_LE(e.best_estimate(), 1.0 + 1e-12);
  }
}

TEST(SpectralNormTest, AgreesWithEigenOnRandomGrams) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = testing::random_matrix(gen, 30, 12);
    const Matrix g = DataMatrix(x, std::vector<double>(30)).gram();
    const double oracle = testing::eigen_max_eigenvalue(g);
    EXPECT_NEAR(spectral_norm_sym(g), oracle, 1e-9 * oracle);
    const double low = testing::eigen_min_eigenvalue(g);
    EXPECT_NEAR(smallest_eigenvalue_sym(g), low, 1e-7 * oracle);
  }
}

TEST(SpectralNormTest, DominatesRayleighQuotients) {
  std::mt19937_64 gen(5);
  const auto x = testing::random_matrix(gen, 20, 8);
  const Matrix g = DataMatrix(x, std::vector<double>(20)).gram();
  const double top = spectral_norm_sym(g);
  for (int trial = 0; trial < 500; ++trial) {
    const auto v = testing::random_vector(gen, 8);
    EXPECT_GE(top * (1 + 1e-10), dot(v, g * v) / sq_norm(v));
  }
}

}  // namespace
}  // namespace lagsim
