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

#include "lagsim/triggers.hpp"

#include <cmath>
#include <string>

#include "lagsim/error.hpp"

namespace lagsim {

void TriggerParams::validate() const {
  if (depth < 1) throw ParameterError("trigger: window depth D must be >= 1");
  if (xi.size() != static_cast<std::size_t>(depth)) {
    throw ParameterError("trigger: expected " + std::to_string(depth) + " weights, got " +
                         std::to_string(xi.size()));
  }
  for (double w : xi) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ParameterError("trigger: weights must be >= 0");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ParameterError("trigger: alpha must be > 0");
  if (workers < 1) throw ParameterError("trigger: worker count must be >= 1");
}

bool TriggerParams::xi_nonincreasing() const {
  for (std::size_t d = 1; d < xi.size(); ++d) {
    if (xi[d] > xi[d - 1]) return false;
  }
  return true;
}

double TriggerParams::xi_sum() const {
  double s = 0.0;
  for (double w : xi) s += w;
  return s;
}

TriggerParams uniform_trigger(int depth, double xi, double alpha, int workers) {
  TriggerParams p{depth, std::vector<double>(depth > 0 ? depth : 0, xi), alpha, workers};
  p.validate();
  return p;
}

LagWindow::LagWindow(int depth) {
  if (depth < 1) throw ParameterError("LagWindow: depth must be >= 1");
  slots_.assign(static_cast<std::size_t>(depth), 0.0);
}

double LagWindow::at(int d) const {
  if (d < 1 || d > depth()) throw ParameterError("LagWindow: index out of range");
  const std::size_t n = slots_.size();
  return slots_[(head_ + static_cast<std::size_t>(d - 1)) % n];
}

void LagWindow::push(double sq_diff) {
  if (!(sq_diff >= 0.0) || !std::isfinite(sq_diff)) {
    throw NumericError("LagWindow: entries must be finite and >= 0");
  }
  const std::size_t n = slots_.size();
  head_ = (head_ + n - 1) % n;
  slots_[head_] = sq_diff;
}

void LagWindow::clear() {
  slots_.assign(slots_.size(), 0.0);
  head_ = 0;
}

std::vector<double> LagWindow::entries() const {
  std::vector<double> out;
  out.reserve(slots_.size());
  for (int d = 1; d <= depth(); ++d) out.push_back(at(d));
  return out;
}

double rhs_threshold(const LagWindow& window, const TriggerParams& params) {
  if (window.depth() != params.depth) {
    throw ParameterError("rhs_threshold: window depth differs from trigger depth");
  }
  double weighted = 0.0;
  for (int d = 1; d <= params.depth; ++d) weighted += params.xi[d - 1] * window.at(d);
  const double m = static_cast<double>(params.workers);
  return weighted / (params.alpha * params.alpha * m * m);
}

bool wk_should_skip(const ModelVector& grad_new, const ModelVector& grad_cached,
                    const LagWindow& window, const TriggerParams& params) {
  return sq_distance(grad_cached, grad_new) <= rhs_threshold(window, params);
}

bool ps_should_skip(const ModelVector& theta_cached, const ModelVector& theta_now,
                    double smoothness, const LagWindow& window, const TriggerParams& params) {
  if (!(smoothness > 0.0)) throw ParameterError("ps_should_skip: L_m must be > 0");
  const double lhs = smoothness * smoothness * sq_distance(theta_cached, theta_now);
  return lhs <= rhs_threshold(window, params);
}

LyapunovSchedule schedule_theorem1(double xi, int depth, double smoothness) {
  if (depth < 1) throw ParameterError("schedule_theorem1: D must be >= 1");
  if (!(smoothness > 0.0)) throw ParameterError("schedule_theorem1: L must be > 0");
  if (!(xi > 0.0) || !(xi * depth < 1.0)) {
    throw ParameterError("schedule_theorem1: need 0 < xi < 1/D");
  }
  const double eta = std::sqrt(depth * xi);
  LyapunovSchedule s;
  s.alpha = (1.0 - eta) / smoothness;
  s.xi.assign(static_cast<std::size_t>(depth), xi);
  s.beta.resize(static_cast<std::size_t>(depth));
  for (int d = 1; d <= depth; ++d) {
    s.beta[d - 1] = (depth - d + 1) * xi / (2.0 * s.alpha * eta);
  }
  return s;
}

double schedule_nonconvex(const std::vector<double>& xi, double smoothness) {
  if (!(smoothness > 0.0)) throw ParameterError("schedule_nonconvex: L must be > 0");
  double sum = 0.0;
  for (double w : xi) {
    if (!(w >= 0.0)) throw ParameterError("schedule_nonconvex: weights must be >= 0");
    sum += w;
  }
  if (!(sum < 1.0)) throw ParameterError("schedule_nonconvex: need sum(xi) < 1");
  return (1.0 - sum) / smoothness;
}

std::vector<double> nonconvex_lyapunov_weights(const std::vector<double>& xi, double alpha) {
  if (!(alpha > 0.0)) throw ParameterError("nonconvex_lyapunov_weights: alpha must be > 0");
  std::vector<double> beta(xi.size());
  double tail = 0.0;
  for (std::size_t d = xi.size(); d-- > 0;) {
    tail += xi[d];
    beta[d] = tail / (2.0 * alpha);
  }
  return beta;
}

}  // namespace lagsim
