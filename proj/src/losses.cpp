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

#include "lagsim/losses.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "lagsim/error.hpp"

namespace lagsim {
namespace {

// log(1 + exp(-m)) without overflow for large |m|.
double log1p_exp_neg(double margin) {
  if (margin > 0.0) return std::log1p(std::exp(-margin));
  return -margin + std::log1p(std::exp(margin));
}

// σ(−m) = 1 / (1 + exp(m)).
double sigmoid_neg(double margin) {
  if (margin >= 0.0) {
    const double e = std::exp(-margin);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(margin));
}

void require_dim(const LossModel& model, const ModelVector& theta, const char* op) {
  if (theta.size() != model.dim()) {
    throw DimensionError(std::string(op) + ": theta has " + std::to_string(theta.size()) +
                         " entries, data has " + std::to_string(model.dim()) + " features");
  }
}

double curvature_weight(LossKind kind) { return kind == LossKind::square ? 2.0 : 0.25; }

Matrix weighted_gram_sum(std::span<const LossModel> models, bool square_only) {
  const std::size_t d = models.front().dim();
  Matrix total(d, d);
  for (const auto& m : models) {
    if (m.dim() != d) throw DimensionError("models disagree on feature dimension");
    if (square_only && m.kind() != LossKind::square) continue;
    total = total + curvature_weight(m.kind()) * m.data().gram();
  }
  return total;
}

}  // namespace

std::string_view to_string(LossKind kind) {
  return kind == LossKind::square ? "square" : "logistic";
}

double default_l2_reg(LossKind kind) { return kind == LossKind::logistic ? 1e-3 : 0.0; }

LossModel::LossModel(LossKind kind, DataMatrix data, double l2_reg)
    : kind_(kind), data_(std::move(data)), l2_reg_(l2_reg) {
  if (!(l2_reg_ >= 0.0) || !std::isfinite(l2_reg_)) {
    throw ParameterError("LossModel: l2_reg must be finite and >= 0");
  }
  if (kind_ == LossKind::logistic) {
    const auto labels = data_.labels();
    for (std::size_t n = 0; n < labels.size(); ++n) {
      if (labels[n] != 1.0 && labels[n] != -1.0) {
        throw ParameterError("LossModel: logistic label at row " + std::to_string(n) +
                             " is not +1/-1");
      }
    }
  }
}

ValueAndGrad loss_value_and_grad(const LossModel& model, const ModelVector& theta) {
  require_dim(model, theta, "loss_value_and_grad");
  const auto& x = model.data().features();
  const auto y = model.data().labels();
  const std::size_t d = model.dim();

  std::vector<double> grad(d, 0.0);
  double value = 0.0;
  for (std::size_t n = 0; n < x.rows(); ++n) {
    const auto row = x.row(n);
    const double pred = dot(row, theta.values());
    double coeff;
    if (model.kind() == LossKind::square) {
      const double residual = y[n] - pred;
      value += residual * residual;
      coeff = -2.0 * residual;
    } else {
      const double margin = y[n] * pred;
      value += log1p_exp_neg(margin);
      coeff = -y[n] * sigmoid_neg(margin);
    }
    for (std::size_t i = 0; i < d; ++i) grad[i] += coeff * row[i];
  }
  if (model.l2_reg() > 0.0) {
    value += 0.5 * model.l2_reg() * sq_norm(theta);
    for (std::size_t i = 0; i < d; ++i) grad[i] += model.l2_reg() * theta[i];
  }
  if (!std::isfinite(value)) throw NumericError("loss value is not finite");
  return {value, ModelVector(std::move(grad))};
}

double loss_value(const LossModel& model, const ModelVector& theta) {
  require_dim(model, theta, "loss_value");
  const auto& x = model.data().features();
  const auto y = model.data().labels();
  double value = 0.0;
  for (std::size_t n = 0; n < x.rows(); ++n) {
    const double pred = dot(x.row(n), theta.values());
    if (model.kind() == LossKind::square) {
      const double residual = y[n] - pred;
      value += residual * residual;
    } else {
      value += log1p_exp_neg(y[n] * pred);
    }
  }
  if (model.l2_reg() > 0.0) value += 0.5 * model.l2_reg() * sq_norm(theta);
  if (!std::isfinite(value)) throw NumericError("loss value is not finite");
  return value;
}

ModelVector loss_grad(const LossModel& model, const ModelVector& theta) {
  return loss_value_and_grad(model, theta).grad;
}

double smoothness_constant(const LossModel& model) {
  const double top = spectral_norm_sym(model.data().gram());
  return curvature_weight(model.kind()) * top + model.l2_reg();
}

double total_loss(std::span<const LossModel> models, const ModelVector& theta) {
  double total = 0.0;
  for (const auto& m : models) total += loss_value(m, theta);
  return total;
}

ModelVector total_grad(std::span<const LossModel> models, const ModelVector& theta) {
  return total_value_and_grad(models, theta).grad;
}

ValueAndGrad total_value_and_grad(std::span<const LossModel> models, const ModelVector& theta) {
  ValueAndGrad total{0.0, ModelVector::zeros(theta.size())};
  for (const auto& m : models) {
    auto part = loss_value_and_grad(m, theta);
    total.value += part.value;
    add_in_place(total.grad, part.grad);
  }
  return total;
}

SmoothnessCert certify_smoothness(std::span<const LossModel> models, GlobalSmoothness mode) {
  if (models.empty()) throw ParameterError("certify_smoothness: no models");
  SmoothnessCert cert;
  double sum = 0.0;
  double reg = 0.0;
  for (const auto& m : models) {
    cert.per_worker.push_back(smoothness_constant(m));
    sum += cert.per_worker.back();
    reg += m.l2_reg();
  }
  if (mode == GlobalSmoothness::sum_of_locals) {
    cert.global = sum;
  } else {
    cert.global = spectral_norm_sym(weighted_gram_sum(models, false)) + reg;
  }
  if (!(cert.global > 0.0)) throw ParameterError("certify_smoothness: global constant is zero");
  return cert;
}

double strong_convexity_constant(std::span<const LossModel> models) {
  if (models.empty()) throw ParameterError("strong_convexity_constant: no models");
  double reg = 0.0;
  bool any_square = false;
  for (const auto& m : models) {
    reg += m.l2_reg();
    any_square = any_square || m.kind() == LossKind::square;
  }
  const double curvature =
      any_square ? smallest_eigenvalue_sym(weighted_gram_sum(models, true)) : 0.0;
  return curvature + reg;
}

}  // namespace lagsim
