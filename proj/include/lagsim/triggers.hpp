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

// Communication-skipping rules for lazily aggregated gradients.
//
// A worker is left out of the current round when its gradient change is
// small relative to the recent movement of the iterate. The recent movement
// is summarized by the lag window: the D latest values of ‖θ^{k+1−d} − θ^{k−d}‖².

#ifndef LAGSIM_TRIGGERS_HPP_
#define LAGSIM_TRIGGERS_HPP_

#include <cstddef>
#include <vector>

#include "lagsim/numeric.hpp"

namespace lagsim {

/// Window depth D, weights ξ_1..ξ_D, stepsize α and worker count M.
struct TriggerParams {
  int depth = 10;
  std::vector<double> xi;
  double alpha = 1.0;
  int workers = 1;

  // Throws ParameterError unless D ≥ 1, |xi| = D, ξ_d ≥ 0, α > 0, M ≥ 1.
  void validate() const;

  // ξ_D ≤ … ≤ ξ_1, which the lazy-communication guarantee relies on.
  bool xi_nonincreasing() const;

  double xi_sum() const;
};

/// Uniform weights ξ_d = xi for d = 1..depth.
TriggerParams uniform_trigger(int depth, double xi, double alpha, int workers);

/// Fixed-capacity ring of squared iterate differences, newest first.
/// Slots that have not been written yet read as zero.
class LagWindow {
 public:
  explicit LagWindow(int depth = 1);

  int depth() const noexcept { return static_cast<int>(slots_.size()); }

  // d is 1-based: at(1) is the most recent difference.
  double at(int d) const;

  void push(double sq_diff);
  void clear();

  // Entries newest first.
  std::vector<double> entries() const;

 private:
  std::vector<double> slots_;
  std::size_t head_ = 0;  // index of the newest entry
};

/// (1/(α²M²))·Σ_d ξ_d·w_d
double rhs_threshold(const LagWindow& window, const TriggerParams& params);

/// Worker-side rule: skip the upload when ‖∇_cached − ∇_new‖² ≤ rhs_threshold.
bool wk_should_skip(const ModelVector& grad_new, const ModelVector& grad_cached,
                    const LagWindow& window, const TriggerParams& params);

/// Server-side rule: skip the worker when L_m²‖θ̂_m − θ^k‖² ≤ rhs_threshold.
bool ps_should_skip(const ModelVector& theta_cached, const ModelVector& theta_now,
                    double smoothness, const LagWindow& window, const TriggerParams& params);

/// Parameters that make the Lyapunov function contract at the linear rate
/// 1 − (1 − √(Dξ))/κ:
///   α = (1 − √(Dξ))/L,  ξ_d = ξ,  β_d = (D − d + 1)ξ / (2αη),  η = √(Dξ).
struct LyapunovSchedule {
  double alpha;
  std::vector<double> xi;
  std::vector<double> beta;
};

// Requires 0 < ξ < 1/D and L > 0.
LyapunovSchedule schedule_theorem1(double xi, int depth, double smoothness);

/// α = (1 − Σ_d ξ_d)/L for smooth nonconvex objectives. Requires Σξ < 1.
double schedule_nonconvex(const std::vector<double>& xi, double smoothness);

/// β_d = Σ_{τ≥d} ξ_τ / (2α), the weights paired with schedule_nonconvex.
std::vector<double> nonconvex_lyapunov_weights(const std::vector<double>& xi, double alpha);

}  // namespace lagsim

#endif  // LAGSIM_TRIGGERS_HPP_
