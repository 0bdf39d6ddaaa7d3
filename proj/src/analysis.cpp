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

#include "lagsim/analysis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lagsim/error.hpp"

namespace lagsim {
namespace {

constexpr double kSlack = 1e-9;

ReferenceSolution solve_normal_equations(std::span<const LossModel> models) {
  const auto d = static_cast<Eigen::Index>(models.front().dim());
  Eigen::MatrixXd hessian = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
  double reg = 0.0;
  for (const auto& m : models) {
    const auto& x = m.data().features();
    const auto y = m.data().labels();
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> xm(
        x.values().data(), static_cast<Eigen::Index>(x.rows()), d);
    Eigen::Map<const Eigen::VectorXd> ym(y.data(), static_cast<Eigen::Index>(y.size()));
    hessian.noalias() += 2.0 * xm.transpose() * xm;
    rhs.noalias() += 2.0 * xm.transpose() * ym;
    reg += m.l2_reg();
  }
  hessian.diagonal().array() += reg;

  ReferenceSolution sol;
  Eigen::VectorXd theta;
  Eigen::LLT<Eigen::MatrixXd> llt(hessian);
  const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
  if (rcond > 1e-13) {
    theta = llt.solve(rhs);
    // Two rounds of iterative refinement push the residual to rounding level.
    for (int i = 0; i < 2; ++i) theta += llt.solve(rhs - hessian * theta);
  } else {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(hessian);
    theta = cod.solve(rhs);
    for (int i = 0; i < 2; ++i) theta += cod.solve(rhs - hessian * theta);
    sol.used_pseudo_inverse = true;
  }
  sol.theta = ModelVector(std::vector<double>(theta.data(), theta.data() + theta.size()));
  const auto vg = total_value_and_grad(models, sol.theta);
  sol.objective = vg.value;
  sol.grad_norm = std::sqrt(sq_norm(vg.grad));
  return sol;
}

ReferenceSolution solve_by_descent(std::span<const LossModel> models,
                                   const ReferenceOptions& options, const ModelVector* start) {
  const double alpha = 1.0 / certify_smoothness(models).global;
  ModelVector theta = start ? *start : ModelVector::zeros(models.front().dim());

  auto vg = total_value_and_grad(models, theta);
  const double tol = options.grad_tolerance * (1.0 + std::sqrt(sq_norm(vg.grad)));

  ReferenceSolution sol;
  sol.converged = false;
  double best = std::numeric_limits<double>::infinity();
  long since_best = 0;
  ModelVector best_theta = theta;
  for (sol.iterations = 0; sol.iterations < options.max_iterations; ++sol.iterations) {
    const double gnorm = std::sqrt(sq_norm(vg.grad));
    if (gnorm < best) {
      best = gnorm;
      best_theta = theta;
      since_best = 0;
    } else if (++since_best >= options.stall_window) {
      break;
    }
    if (gnorm <= tol) {
      sol.converged = true;
      break;
    }
    theta = axpy(-alpha, vg.grad, theta);
    vg = total_value_and_grad(models, theta);
  }
  sol.theta = best_theta;
  const auto final_vg = total_value_and_grad(models, sol.theta);
  sol.objective = final_vg.value;
  sol.grad_norm = std::sqrt(sq_norm(final_vg.grad));
  return sol;
}

}  // namespace

double lyapunov_value(std::span<const ModelVector> history, std::span<const LossModel> models,
                      const LyapunovParams& params) {
  if (history.empty()) throw ParameterError("lyapunov_value: empty iterate history");
  const double objective = total_loss(models, history.front());
  if (params.reference_optimum > objective + kSlack) {
    throw ParameterError("lyapunov_value: reference optimum exceeds current objective");
  }
  auto iterate = [&](std::size_t i) -> const ModelVector& {
    return history[std::min(i, history.size() - 1)];
  };
  double value = objective - params.reference_optimum;
  for (std::size_t d = 1; d <= params.beta.size(); ++d) {
    value += params.beta[d - 1] * sq_distance(iterate(d - 1), iterate(d));
  }
  return value;
}

double lyapunov_from_window(double objective_error, const LagWindow& window,
                            std::span<const double> beta) {
  if (beta.size() != static_cast<std::size_t>(window.depth())) {
    throw ParameterError("lyapunov_from_window: beta length differs from window depth");
  }
  double value = objective_error;
  for (int d = 1; d <= window.depth(); ++d) value += beta[d - 1] * window.at(d);
  return value;
}

HeterogeneityProfile make_profile(std::vector<double> smoothness, double global_smoothness) {
  if (!(global_smoothness > 0.0)) throw ParameterError("make_profile: L must be > 0");
  HeterogeneityProfile p;
  p.global_smoothness = global_smoothness;
  for (double lm : smoothness) {
    if (!(lm > 0.0)) throw ParameterError("make_profile: every L_m must be > 0");
    p.importance.push_back(lm / global_smoothness);
  }
  p.smoothness = std::move(smoothness);
  return p;
}

std::vector<double> gamma_thresholds(const TriggerParams& params, double global_smoothness) {
  params.validate();
  if (!(global_smoothness > 0.0)) throw ParameterError("gamma_thresholds: L must be > 0");
  const double a = params.alpha;
  const double l = global_smoothness;
  const double m = params.workers;
  std::vector<double> gamma(static_cast<std::size_t>(params.depth));
  for (int d = 1; d <= params.depth; ++d) {
    gamma[d - 1] = params.xi[d - 1] / (d * a * a * l * l * m * m);
  }
  return gamma;
}

double heterogeneity_score(const HeterogeneityProfile& profile, double gamma) {
  if (profile.importance.empty()) return 0.0;
  std::size_t count = 0;
  for (double h : profile.importance) {
    if (h * h <= gamma) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(profile.importance.size());
}

double reduced_fraction(const HeterogeneityProfile& profile, std::span<const double> gammas) {
  double frac = 0.0;
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    const double d = static_cast<double>(i + 1);
    frac += (1.0 / d - 1.0 / (d + 1.0)) * heterogeneity_score(profile, gammas[i]);
  }
  return frac;
}

double iteration_complexity_lag(double kappa, int depth, double xi, double eps) {
  if (depth < 1) throw ParameterError("iteration_complexity_lag: D must be >= 1");
  if (!(xi >= 0.0) || !(xi * depth < 1.0)) {
    throw ParameterError("iteration_complexity_lag: need 0 <= xi < 1/D");
  }
  if (!(kappa >= 1.0)) throw ParameterError("iteration_complexity_lag: need kappa >= 1");
  if (!(eps > 0.0 && eps < 1.0)) throw ParameterError("iteration_complexity_lag: need 0 < eps < 1");
  return kappa / (1.0 - std::sqrt(depth * xi)) * std::log(1.0 / eps);
}

namespace {

double uniform_xi(const TriggerParams& params) {
  params.validate();
  for (double w : params.xi) {
    if (w != params.xi.front()) throw ParameterError("bound requires uniform weights xi_d = xi");
  }
  return params.xi.front();
}

}  // namespace

double comm_bound_lag(const HeterogeneityProfile& profile, const TriggerParams& params,
                      double global_smoothness, double kappa, double eps) {
  const double xi = uniform_xi(params);
  const double iterations = iteration_complexity_lag(kappa, params.depth, xi, eps);
  return comm_bound_for_iterations(profile, params, global_smoothness, iterations);
}

double comm_bound_for_iterations(const HeterogeneityProfile& profile, const TriggerParams& params,
                                 double global_smoothness, double iterations) {
  const auto gammas = gamma_thresholds(params, global_smoothness);
  return (1.0 - reduced_fraction(profile, gammas)) * params.workers * iterations;
}

double comm_bound_nonconvex(const HeterogeneityProfile& profile, const TriggerParams& params,
                            double global_smoothness, double eps, double initial_lyapunov) {
  params.validate();
  const double sum = params.xi_sum();
  if (!(sum < 1.0)) throw ParameterError("comm_bound_nonconvex: need sum(xi) < 1");
  if (!(eps > 0.0)) throw ParameterError("comm_bound_nonconvex: need eps > 0");
  const double gd = params.workers * 2.0 * global_smoothness * initial_lyapunov / eps;
  const auto gammas = gamma_thresholds(params, global_smoothness);
  return (1.0 - reduced_fraction(profile, gammas)) * gd / (1.0 - sum);
}

bool nonconvex_reduction_condition(const HeterogeneityProfile& profile, int depth) {
  if (depth < 1) throw ParameterError("nonconvex_reduction_condition: D must be >= 1");
  const double m = static_cast<double>(profile.importance.size());
  const double denom = (depth + 1.0) * depth * m * m;
  // h is a right-continuous step function, so h(γ')/γ' peaks at the jumps γ' = H²(m).
  for (double h : profile.importance) {
    const double g = h * h;
    if (g < heterogeneity_score(profile, g) / denom) return true;
  }
  return false;
}

Conditioning conditioning(std::span<const LossModel> models, GlobalSmoothness mode) {
  Conditioning c;
  c.smoothness = certify_smoothness(models, mode).global;
  c.strong_convexity = strong_convexity_constant(models);
  c.kappa = c.strong_convexity > 0.0 ? c.smoothness / c.strong_convexity
                                     : std::numeric_limits<double>::infinity();
  return c;
}

ReferenceSolution solve_reference(std::span<const LossModel> models,
                                  const ReferenceOptions& options, const ModelVector* start) {
  if (models.empty()) throw ParameterError("solve_reference: no models");
  for (const auto& m : models) {
    if (m.dim() != models.front().dim()) {
      throw DimensionError("solve_reference: models disagree on feature dimension");
    }
  }
  const bool all_square = std::all_of(models.begin(), models.end(),
                                      [](const LossModel& m) { return m.kind() == LossKind::square; });
  return all_square ? solve_normal_equations(models) : solve_by_descent(models, options, start);
}

}  // namespace lagsim
