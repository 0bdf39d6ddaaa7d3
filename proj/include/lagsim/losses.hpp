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

// Per-worker loss models: value, gradient and a certified smoothness constant.

#ifndef LAGSIM_LOSSES_HPP_
#define LAGSIM_LOSSES_HPP_

#include <span>
#include <string_view>
#include <vector>

#include "lagsim/numeric.hpp"

namespace lagsim {

enum class LossKind { square, logistic };

std::string_view to_string(LossKind kind);

/// Default ℓ2 weight: 1e-3 for logistic regression, none for least squares.
double default_l2_reg(LossKind kind);

/// One worker's local objective L_m(θ).
///
///   square:   Σ_n (y_n − x_nᵀθ)²
///   logistic: Σ_n log(1 + exp(−y_n x_nᵀθ)) + (λ/2)‖θ‖²
///
/// Immutable after construction. Logistic labels must be ±1.
class LossModel {
 public:
  LossModel(LossKind kind, DataMatrix data, double l2_reg = 0.0);

  LossKind kind() const noexcept { return kind_; }
  const DataMatrix& data() const noexcept { return data_; }
  double l2_reg() const noexcept { return l2_reg_; }
  std::size_t dim() const noexcept { return data_.features_dim(); }

 private:
  LossKind kind_;
  DataMatrix data_;
  double l2_reg_;
};

double loss_value(const LossModel& model, const ModelVector& theta);
ModelVector loss_grad(const LossModel& model, const ModelVector& theta);

struct ValueAndGrad {
  double value;
  ModelVector grad;
};

// One pass over the data for both quantities.
ValueAndGrad loss_value_and_grad(const LossModel& model, const ModelVector& theta);

/// Global Lipschitz constant of ∇L_m:
///   square:   2·λ_max(XᵀX)
///   logistic: λ_max(XᵀX)/4 + λ
double smoothness_constant(const LossModel& model);

// Objective and gradient of the sum Σ_m L_m, reduced in model order.
double total_loss(std::span<const LossModel> models, const ModelVector& theta);
ModelVector total_grad(std::span<const LossModel> models, const ModelVector& theta);
ValueAndGrad total_value_and_grad(std::span<const LossModel> models, const ModelVector& theta);

enum class GlobalSmoothness {
  tight,          // λ_max of the summed curvature bound
  sum_of_locals,  // Σ_m L_m
};

/// Per-worker L_m plus the constant L of the sum.
struct SmoothnessCert {
  std::vector<double> per_worker;
  double global = 0.0;
};

/// Computes L_m for each model and L for Σ_m L_m.
///
/// The tight global constant is λ_max(Σ_m c_m X_mᵀX_m) + Σ_m λ_m, with
/// c_m = 2 for square and 1/4 for logistic models; it never exceeds Σ_m L_m.
SmoothnessCert certify_smoothness(std::span<const LossModel> models,
                                  GlobalSmoothness mode = GlobalSmoothness::tight);

/// Strong-convexity (PL) constant of the sum: λ_min(Σ_sq 2 X_mᵀX_m) + Σ_m λ_m.
/// Logistic curvature is not lower bounded, so only its regularizer counts.
double strong_convexity_constant(std::span<const LossModel> models);

}  // namespace lagsim

#endif  // LAGSIM_LOSSES_HPP_
