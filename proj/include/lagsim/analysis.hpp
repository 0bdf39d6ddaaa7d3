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

// Theoretical quantities attached to a LAG run: Lyapunov values, lazy
// communication thresholds, the heterogeneity score, complexity bounds and
// the reference optimum that every optimality error is measured against.

#ifndef LAGSIM_ANALYSIS_HPP_
#define LAGSIM_ANALYSIS_HPP_

#include <span>
#include <vector>

#include "lagsim/losses.hpp"
#include "lagsim/numeric.hpp"
#include "lagsim/triggers.hpp"

namespace lagsim {

struct LyapunovParams {
  std::vector<double> beta;  // β_1..β_D, all ≥ 0
  double reference_optimum = 0.0;
};

/// V^k = L(θ^k) − L(θ*) + Σ_d β_d‖θ^{k+1−d} − θ^{k−d}‖².
///
/// `history` holds the latest iterates newest first (history[0] = θ^k). When
/// fewer than D+1 are given the oldest one is repeated, i.e. the sequence is
/// treated as starting at rest.
double lyapunov_value(std::span<const ModelVector> history, std::span<const LossModel> models,
                      const LyapunovParams& params);

/// Same quantity from an already-computed optimality error and lag window.
double lyapunov_from_window(double objective_error, const LagWindow& window,
                            std::span<const double> beta);

/// Importance factors H(m) = L_m / L.
struct HeterogeneityProfile {
  std::vector<double> smoothness;
  double global_smoothness = 0.0;
  std::vector<double> importance;
};

HeterogeneityProfile make_profile(std::vector<double> smoothness, double global_smoothness);

/// γ_d = ξ_d / (d·α²·L²·M²), d = 1..D.
std::vector<double> gamma_thresholds(const TriggerParams& params, double global_smoothness);

/// h(γ) = (1/M)·#{m : H²(m) ≤ γ}.
double heterogeneity_score(const HeterogeneityProfile& profile, double gamma);

/// ΔC̄ = Σ_d (1/d − 1/(d+1))·h(γ_d), the guaranteed fraction of uploads saved per iteration.
double reduced_fraction(const HeterogeneityProfile& profile, std::span<const double> gammas);

/// κ/(1 − √(Dξ))·ln(1/ε). Requires 0 ≤ ξ < 1/D, κ ≥ 1, 0 < ε < 1.
double iteration_complexity_lag(double kappa, int depth, double xi, double eps);

/// (1 − ΔC̄)·M·I_LAG(ε) with uniform weights ξ taken from `params`.
double comm_bound_lag(const HeterogeneityProfile& profile, const TriggerParams& params,
                      double global_smoothness, double kappa, double eps);

/// The same bound with a measured iteration count in place of I_LAG(ε).
double comm_bound_for_iterations(const HeterogeneityProfile& profile, const TriggerParams& params,
                                 double global_smoothness, double iterations);

/// (1 − ΔC̄)·C_GD/(1 − Σξ_d), where C_GD = M·2L·V¹/ε is the nonconvex GD
/// upload count for reaching min_k ‖∇L(θ^k)‖² ≤ ε.
double comm_bound_nonconvex(const HeterogeneityProfile& profile, const TriggerParams& params,
                            double global_smoothness, double eps, double initial_lyapunov);

/// Whether some γ' satisfies γ' < h(γ')/((D+1)·D·M²), the condition under
/// which the nonconvex bound is strictly below GD.
bool nonconvex_reduction_condition(const HeterogeneityProfile& profile, int depth);

/// Condition number of the summed objective.
struct Conditioning {
  double smoothness = 0.0;  // L
  double strong_convexity = 0.0;  // μ
  double kappa = 0.0;  // L/μ, +inf when μ = 0
};

Conditioning conditioning(std::span<const LossModel> models,
                          GlobalSmoothness mode = GlobalSmoothness::tight);

struct ReferenceSolution {
  ModelVector theta;
  double objective = 0.0;
  double grad_norm = 0.0;
  long iterations = 0;
  bool used_pseudo_inverse = false;  // singular normal equations
  bool converged = true;
};

struct ReferenceOptions {
  double grad_tolerance = 1e-13;  // relative to 1 + ‖∇L(θ_start)‖
  long max_iterations = 1'000'000;
  // Stop the first-order solver when the best gradient norm has not improved
  // for this many iterations (the floating-point floor was reached).
  long stall_window = 5'000;
};

/// Minimizer of Σ_m L_m.
///
/// All-square problems are solved in closed form from the stacked normal
/// equations (pseudo-inverse when singular). Anything involving logistic
/// losses runs gradient descent with α = 1/L from `start` (zero by default).
ReferenceSolution solve_reference(std::span<const LossModel> models,
                                  const ReferenceOptions& options = {},
                                  const ModelVector* start = nullptr);

}  // namespace lagsim

#endif  // LAGSIM_ANALYSIS_HPP_
