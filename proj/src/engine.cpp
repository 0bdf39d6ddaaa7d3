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

#include "lagsim/engine.hpp"

#include "lagsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lagsim {
namespace {

constexpr double kSlack = 1e-9;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::vector<int> all_ids(std::size_t m) {
  std::vector<int> ids(m);
  for (std::size_t i = 0; i < m; ++i) ids[i] = static_cast<int>(i + 1);
  return ids;
}

// ∇^k from the refreshed caches. A full round rebuilds the sum in worker
// order, which is exactly what batch GD computes; a partial round refines
// ∇^{k−1} with the uploaded differences.
void aggregate(ServerState& server, std::span<const WorkerNode> workers,
               const std::vector<ModelVector>& deltas, bool full_round) {
  if (full_round) {
    ModelVector sum = ModelVector::zeros(server.theta.size());
    for (const auto& w : workers) add_in_place(sum, w.cached_grad);
    server.agg_grad = std::move(sum);
    return;
  }
  for (const auto& delta : deltas) add_in_place(server.agg_grad, delta);
}

void descend(ServerState& server, double alpha) {
  ModelVector next = axpy(-alpha, server.agg_grad, server.theta);
  server.window.push(sq_distance(next, server.theta));
  server.theta = std::move(next);
}

// Refresh the listed workers at θ^k and apply the Eq. (4)-style update.
LedgerEntry refresh_and_update(ServerState& server, std::span<WorkerNode> workers,
                               const std::vector<std::size_t>& selected, double alpha, int k,
                               bool broadcast_all) {
  LedgerEntry entry;
  entry.iteration = k;
  const bool full_round = selected.size() == workers.size();
  std::vector<ModelVector> deltas;
  for (std::size_t idx : selected) {
    auto& w = workers[idx];
    ModelVector fresh = loss_grad(w.model, server.theta);
    if (!full_round) deltas.push_back(fresh - w.cached_grad);
    w.refresh(server.theta, std::move(fresh));
    server.ps_cached_thetas[idx] = server.theta;
    entry.uploads.push_back(w.id);
  }
  entry.grad_evals = entry.uploads;
  entry.downloads = broadcast_all ? all_ids(workers.size()) : entry.uploads;
  aggregate(server, workers, deltas, full_round);
  descend(server, alpha);
  return entry;
}

bool is_lag(Method m) { return m == Method::lag_wk || m == Method::lag_ps; }

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::gd: return "gd";
    case Method::lag_wk: return "lag_wk";
    case Method::lag_ps: return "lag_ps";
    case Method::cyc_iag: return "cyc_iag";
    case Method::num_iag: return "num_iag";
  }
  return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
  for (Method m : {Method::gd, Method::lag_wk, Method::lag_ps, Method::cyc_iag, Method::num_iag}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

bool uses_init_round(Method method) { return method != Method::gd; }

void WorkerNode::refresh(const ModelVector& theta) { refresh(theta, loss_grad(model, theta)); }

void WorkerNode::refresh(const ModelVector& theta, ModelVector grad) {
  cached_theta = theta;
  cached_grad = std::move(grad);
}

std::vector<WorkerNode> make_workers(std::vector<LossModel> models) {
  std::vector<WorkerNode> workers;
  workers.reserve(models.size());
  int id = 1;
  for (auto& m : models) {
    const double lm = smoothness_constant(m);
    workers.push_back(WorkerNode{id++, std::move(m), lm, ModelVector{}, ModelVector{}});
  }
  return workers;
}

CommLedger::CommLedger(int workers)
    : workers_(workers), per_worker_uploads_(static_cast<std::size_t>(std::max(workers, 0)), 0) {}

void CommLedger::record(LedgerEntry entry) {
  for (int id : entry.uploads) {
    if (!std::binary_search(entry.grad_evals.begin(), entry.grad_evals.end(), id)) {
      throw ParameterError("ledger: worker " + std::to_string(id) +
                           " uploads without evaluating a gradient");
    }
    if (id < 1 || id > workers_) throw ParameterError("ledger: worker id out of range");
    ++per_worker_uploads_[static_cast<std::size_t>(id - 1)];
  }
  const auto n = static_cast<long>(entry.uploads.size());
  total_uploads_ += n;
  if (entry.iteration == 0) init_uploads_ += n;
  total_downloads_ += static_cast<long>(entry.downloads.size());
  total_grad_evals_ += static_cast<long>(entry.grad_evals.size());
  entries_.push_back(std::move(entry));
}

std::uint64_t CounterRng::bits(std::uint64_t counter) const {
  return splitmix64(splitmix64(seed_) ^ splitmix64(counter + 0x632BE59BD9B4E019ULL));
}

double CounterRng::uniform(std::uint64_t counter) const {
  return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
}

std::pair<ServerState, LedgerEntry> init_round(std::span<WorkerNode> workers,
                                               const ModelVector& theta1, int window_depth) {
  ServerState server{theta1, ModelVector::zeros(theta1.size()), LagWindow(window_depth), {}};
  for (auto& w : workers) {
    w.refresh(theta1);
    add_in_place(server.agg_grad, w.cached_grad);
    server.ps_cached_thetas.push_back(theta1);
  }
  LedgerEntry entry;
  entry.iteration = 0;
  entry.uploads = all_ids(workers.size());
  entry.downloads = entry.uploads;
  entry.grad_evals = entry.uploads;
  return {std::move(server), std::move(entry)};
}

LedgerEntry step_gd(ServerState& server, std::span<WorkerNode> workers, double alpha, int k) {
  std::vector<std::size_t> everyone(workers.size());
  for (std::size_t i = 0; i < everyone.size(); ++i) everyone[i] = i;
  return refresh_and_update(server, workers, everyone, alpha, k, true);
}

LedgerEntry step_lag_wk(ServerState& server, std::span<WorkerNode> workers,
                        const TriggerParams& params, int k) {
  LedgerEntry entry;
  entry.iteration = k;
  entry.downloads = all_ids(workers.size());
  entry.grad_evals = entry.downloads;

  std::vector<ModelVector> deltas;
  for (auto& w : workers) {
    ModelVector fresh = loss_grad(w.model, server.theta);
    if (wk_should_skip(fresh, w.cached_grad, server.window, params)) continue;
    deltas.push_back(fresh - w.cached_grad);
    w.refresh(server.theta, std::move(fresh));
    server.ps_cached_thetas[static_cast<std::size_t>(w.id - 1)] = server.theta;
    entry.uploads.push_back(w.id);
  }
  aggregate(server, workers, deltas, deltas.size() == workers.size());
  descend(server, params.alpha);
  return entry;
}

LedgerEntry step_lag_ps(ServerState& server, std::span<WorkerNode> workers,
                        const TriggerParams& params, int k) {
  std::vector<std::size_t> violators;
  for (std::size_t i = 0; i < workers.size(); ++i) {
    if (!ps_should_skip(server.ps_cached_thetas[i], server.theta, workers[i].smoothness,
                        server.window, params)) {
      violators.push_back(i);
    }
  }
  return refresh_and_update(server, workers, violators, params.alpha, k, false);
}

LedgerEntry step_cyc_iag(ServerState& server, std::span<WorkerNode> workers, double alpha, int k) {
  if (k < 1) throw ParameterError("step_cyc_iag: iterations start at 1");
  const std::size_t m = static_cast<std::size_t>(k - 1) % workers.size();
  return refresh_and_update(server, workers, {m}, alpha, k, false);
}

std::size_t num_iag_pick(std::span<const WorkerNode> workers, const CounterRng& rng, int k) {
  double total = 0.0;
  for (const auto& w : workers) total += w.smoothness;
  const double u = rng.uniform(static_cast<std::uint64_t>(k)) * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < workers.size(); ++i) {
    cum += workers[i].smoothness;
    if (u < cum) return i;
  }
  return workers.size() - 1;
}

LedgerEntry step_num_iag(ServerState& server, std::span<WorkerNode> workers, double alpha,
                         const CounterRng& rng, int k) {
  const std::size_t m = num_iag_pick(workers, rng, k);
  return refresh_and_update(server, workers, {m}, alpha, k, false);
}

void RunConfig::validate() const {
  if (max_iters < 1) throw ParameterError("run: max_iters must be >= 1");
  if (!(target_eps > 0.0)) throw ParameterError("run: target_eps must be > 0");
  trigger.validate();
  if (!lyapunov_beta.empty() && lyapunov_beta.size() != static_cast<std::size_t>(trigger.depth)) {
    throw ParameterError("run: lyapunov weights must have one entry per window slot");
  }
  if (assert_lemmas && !(global_smoothness > 0.0)) {
    throw ParameterError("run: lemma checks need the global smoothness constant");
  }
  if (drift_check_every < 1) throw ParameterError("run: drift_check_every must be >= 1");
}

namespace {

class LemmaChecker {
 public:
  LemmaChecker(const RunConfig& cfg, std::span<const WorkerNode> workers, LemmaReport& report)
      : cfg_(cfg), report_(report) {
    if (!cfg.assert_lemmas || !is_lag(cfg.method) || !cfg.trigger.xi_nonincreasing()) return;
    // Largest d with H²(m) ≤ γ_d; γ_d is nonincreasing in d for monotone weights.
    const auto gammas = gamma_thresholds(cfg.trigger, cfg.global_smoothness);
    for (const auto& w : workers) {
      const double h = w.smoothness / cfg.global_smoothness;
      int best = 0;
      for (int d = 1; d <= cfg.trigger.depth; ++d) {
        if (h * h <= gammas[d - 1]) best = d;
      }
      lazy_depth_.push_back(best);
    }
  }

  void check_step(double f_before, double f_after, const ModelVector& grad_before,
                  const ModelVector& theta_before, const ServerState& server) {
    if (!cfg_.assert_lemmas) return;
    const double a = cfg_.trigger.alpha;
    const double l = cfg_.global_smoothness;
    const double g2 = sq_norm(grad_before);
    const double change = f_after - f_before;
    if (cfg_.method == Method::gd) {
      ++report_.gd_descent_checks;
      note(change - (-(a - a * a * l / 2.0) * g2), report_.gd_descent_violations);
    } else {
      // ∇^k − ∇L(θ^k) is the summed staleness Σ_{m∉M^k} (∇L_m(θ̂_m) − ∇L_m(θ^k)).
      const double stale = sq_distance(server.agg_grad, grad_before);
      const double move = sq_distance(server.theta, theta_before);
      const double bound = -a / 2.0 * g2 + a / 2.0 * stale + (l / 2.0 - 1.0 / (2.0 * a)) * move;
      ++report_.lag_descent_checks;
      note(change - bound, report_.lag_descent_violations);
    }
  }

  void check_lyapunov(double before, double after) {
    if (!cfg_.assert_lemmas) return;
    ++report_.lyapunov_checks;
    note(after - before, report_.lyapunov_violations);
  }

  void check_lazy(const CommLedger& ledger, int k) {
    for (std::size_t i = 0; i < lazy_depth_.size(); ++i) {
      const int d = lazy_depth_[i];
      if (d == 0) continue;
      ++report_.lazy_comm_checks;
      const long allowed = (k + d) / (d + 1) + 1;  // ⌈k/(d+1)⌉ + 1
      const long used = ledger.uploads_of(static_cast<int>(i + 1));
      if (used > allowed) {
        ++report_.lazy_comm_violations;
        report_.max_excess = std::max(report_.max_excess, static_cast<double>(used - allowed));
      }
    }
  }

  void check_drift(const ServerState& server, std::span<const WorkerNode> workers, int k) {
    if (!cfg_.assert_lemmas || cfg_.method == Method::gd || k % cfg_.drift_check_every != 0) return;
    ModelVector sum = ModelVector::zeros(server.theta.size());
    double scale = 0.0;
    for (const auto& w : workers) {
      add_in_place(sum, w.cached_grad);
      scale += std::sqrt(sq_norm(w.cached_grad));
    }
    ++report_.drift_checks;
    const double drift = std::sqrt(sq_distance(sum, server.agg_grad));
    if (drift > 1e-9 * std::max(scale, std::numeric_limits<double>::min())) {
      ++report_.drift_violations;
    }
  }

 private:
  void note(double excess, long& counter) {
    if (excess > kSlack) {
      ++counter;
      report_.max_excess = std::max(report_.max_excess, excess);
    }
  }

  const RunConfig& cfg_;
  LemmaReport& report_;
  std::vector<int> lazy_depth_;
};

ValueAndGrad evaluate(std::span<const WorkerNode> workers, const ModelVector& theta) {
  ValueAndGrad total{0.0, ModelVector::zeros(theta.size())};
  for (const auto& w : workers) {
    auto part = loss_value_and_grad(w.model, theta);
    total.value += part.value;
    add_in_place(total.grad, part.grad);
  }
  return total;
}

}  // namespace

Trace run(const RunConfig& config, std::span<WorkerNode> workers) {
  config.validate();
  if (workers.empty()) throw ParameterError("run: no workers");
  if (static_cast<std::size_t>(config.trigger.workers) != workers.size()) {
    throw ParameterError("run: trigger worker count differs from the number of workers");
  }
  const std::size_t dim = workers.front().model.dim();
  const ModelVector theta1 = config.theta1.value_or(ModelVector::zeros(dim));
  if (theta1.size() != dim) throw DimensionError("run: theta1 has the wrong dimension");

  Trace trace;
  trace.method = config.method;
  trace.workers = static_cast<int>(workers.size());
  trace.ledger = CommLedger(trace.workers);

  ServerState server;
  if (uses_init_round(config.method)) {
    auto [state, entry] = init_round(workers, theta1, config.trigger.depth);
    server = std::move(state);
    trace.ledger.record(std::move(entry));
  } else {
    server = ServerState{theta1, ModelVector::zeros(dim), LagWindow(config.trigger.depth),
                         std::vector<ModelVector>(workers.size(), theta1)};
  }

  const bool track_v = !config.lyapunov_beta.empty();
  auto vg = evaluate(workers, server.theta);
  trace.initial_objective_error = vg.value - config.reference_optimum;
  trace.initial_grad_sq_norm = sq_norm(vg.grad);
  std::optional<double> v_now;
  if (track_v) {
    v_now = lyapunov_from_window(trace.initial_objective_error, server.window, config.lyapunov_beta);
    trace.initial_lyapunov = v_now;
  }
  trace.final_theta = server.theta;
  if (config.stop_on_target && trace.initial_objective_error <= config.target_eps) {
    trace.reached_target = true;
    return trace;
  }

  const double blowup =
      config.divergence_factor * std::max(std::abs(trace.initial_objective_error),
                                          std::numeric_limits<double>::min());
  const CounterRng rng(config.seed);
  LemmaChecker checker(config, workers, trace.lemmas);

  for (int k = 1; k <= config.max_iters; ++k) {
    const ModelVector theta_before = server.theta;
    ValueAndGrad next{0.0, {}};
    try {
      LedgerEntry entry;
      switch (config.method) {
        case Method::gd: entry = step_gd(server, workers, config.trigger.alpha, k); break;
        case Method::lag_wk: entry = step_lag_wk(server, workers, config.trigger, k); break;
        case Method::lag_ps: entry = step_lag_ps(server, workers, config.trigger, k); break;
        case Method::cyc_iag: entry = step_cyc_iag(server, workers, config.trigger.alpha, k); break;
        case Method::num_iag:
          entry = step_num_iag(server, workers, config.trigger.alpha, rng, k);
          break;
      }
      trace.ledger.record(std::move(entry));
      next = evaluate(workers, server.theta);
    } catch (const NumericError& e) {
      trace.diverged = true;
      throw DivergenceError(std::string("run: ") + e.what() + " at iteration " + std::to_string(k),
                            std::move(trace));
    }

    const double error = next.value - config.reference_optimum;
    if (!std::isfinite(error) || error > blowup) {
      trace.diverged = true;
      trace.final_theta = server.theta;
      throw DivergenceError("run: objective diverged at iteration " + std::to_string(k),
                            std::move(trace));
    }

    checker.check_step(vg.value, next.value, vg.grad, theta_before, server);
    TraceRow row;
    row.iteration = k;
    row.objective_error = error;
    row.grad_sq_norm = sq_norm(next.grad);
    row.cum_uploads = trace.ledger.total_uploads();
    row.cum_uploads_excl_init = trace.ledger.total_uploads() - trace.ledger.init_uploads();
    if (track_v) {
      const double v_next = lyapunov_from_window(error, server.window, config.lyapunov_beta);
      checker.check_lyapunov(*v_now, v_next);
      v_now = v_next;
      row.lyapunov = v_next;
    }
    if (config.assert_lemmas) {
      checker.check_lazy(trace.ledger, k);
      checker.check_drift(server, workers, k);
    }
    trace.rows.push_back(row);
    vg = std::move(next);

    if (config.stop_on_target && error <= config.target_eps) {
      trace.reached_target = true;
      break;
    }
  }
  trace.final_theta = server.theta;
  if (!config.stop_on_target) {
    trace.reached_target = !trace.rows.empty() && trace.rows.back().objective_error <= config.target_eps;
  }
  return trace;
}

}  // namespace lagsim
