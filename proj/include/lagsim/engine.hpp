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

// Parameter-server simulation of batch GD, LAG-WK, LAG-PS and the two
// incremental aggregated gradient baselines, with exact per-worker
// communication accounting.
//
// Iterations are numbered from 1. Iteration k reads θ^k and produces θ^{k+1}.
// The initialization round (caches filled at θ¹) is recorded as iteration 0.

#ifndef LAGSIM_ENGINE_HPP_
#define LAGSIM_ENGINE_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lagsim/error.hpp"
#include "lagsim/losses.hpp"
#include "lagsim/numeric.hpp"
#include "lagsim/triggers.hpp"

namespace lagsim {

enum class Method { gd, lag_wk, lag_ps, cyc_iag, num_iag };

std::string_view to_string(Method method);
std::optional<Method> parse_method(std::string_view name);

// Methods that start from an initialization round of cached gradients.
bool uses_init_round(Method method);

/// A worker's shard, loss and the gradient it last reported.
/// cached_grad is always loss_grad(model, cached_theta).
struct WorkerNode {
  int id = 0;  // 1..M
  LossModel model;
  double smoothness = 0.0;
  ModelVector cached_theta;
  ModelVector cached_grad;

  // Evaluates ∇L_m(theta) and stores it with theta as the new cache.
  void refresh(const ModelVector& theta);
  // Same, reusing an already evaluated gradient.
  void refresh(const ModelVector& theta, ModelVector grad);
};

/// Builds workers with ids 1..M and their certified L_m. Caches start empty.
std::vector<WorkerNode> make_workers(std::vector<LossModel> models);

struct ServerState {
  ModelVector theta;     // θ^k
  ModelVector agg_grad;  // ∇^k = Σ_m cached_grad_m
  LagWindow window;
  std::vector<ModelVector> ps_cached_thetas;  // θ̂_m as known to the server
};

/// One iteration's traffic. Worker ids are ascending.
struct LedgerEntry {
  int iteration = 0;
  std::vector<int> uploads;
  std::vector<int> downloads;
  std::vector<int> grad_evals;
};

class CommLedger {
 public:
  explicit CommLedger(int workers = 0);

  // Throws ParameterError when an upload has no matching gradient evaluation.
  void record(LedgerEntry entry);

  int workers() const noexcept { return workers_; }
  const std::vector<LedgerEntry>& entries() const noexcept { return entries_; }
  long total_uploads() const noexcept { return total_uploads_; }
  long total_downloads() const noexcept { return total_downloads_; }
  long total_grad_evals() const noexcept { return total_grad_evals_; }
  long init_uploads() const noexcept { return init_uploads_; }
  // Uploads of worker `id` (1-based) so far, including the init round.
  long uploads_of(int id) const { return per_worker_uploads_.at(static_cast<std::size_t>(id - 1)); }
  const std::vector<long>& per_worker_uploads() const noexcept { return per_worker_uploads_; }

 private:
  int workers_;
  std::vector<LedgerEntry> entries_;
  std::vector<long> per_worker_uploads_;
  long total_uploads_ = 0;
  long total_downloads_ = 0;
  long total_grad_evals_ = 0;
  long init_uploads_ = 0;
};

/// Counter-based generator: the draw for a given (seed, counter) pair is a
/// pure function of both, independent of call order and platform.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}
  std::uint64_t bits(std::uint64_t counter) const;
  // Uniform in [0, 1).
  double uniform(std::uint64_t counter) const;

 private:
  std::uint64_t seed_;
};

/// Fills every cache at θ¹ and sets ∇⁰ = Σ_m ∇L_m(θ¹). Charged as M uploads and
/// M downloads in iteration 0.
std::pair<ServerState, LedgerEntry> init_round(std::span<WorkerNode> workers,
                                               const ModelVector& theta1, int window_depth);

/// θ^{k+1} = θ^k − α Σ_m ∇L_m(θ^k). All M workers download, evaluate and upload.
LedgerEntry step_gd(ServerState& server, std::span<WorkerNode> workers, double alpha, int k);

/// Worker-side LAG: broadcast θ^k, every worker evaluates, only workers that
/// violate the skip rule upload δ∇_m = ∇L_m(θ^k) − ∇L_m(θ̂_m).
LedgerEntry step_lag_wk(ServerState& server, std::span<WorkerNode> workers,
                        const TriggerParams& params, int k);

/// Server-side LAG: the server checks L_m²‖θ̂_m − θ^k‖² against the window and
/// contacts only the violators.
LedgerEntry step_lag_ps(ServerState& server, std::span<WorkerNode> workers,
                        const TriggerParams& params, int k);

/// Cyclic IAG: worker ((k−1) mod M)+1 refreshes.
LedgerEntry step_cyc_iag(ServerState& server, std::span<WorkerNode> workers, double alpha, int k);

/// Index (0-based) of the worker Num-IAG refreshes at iteration k, drawn with
/// probability L_m/Σ L_m.
std::size_t num_iag_pick(std::span<const WorkerNode> workers, const CounterRng& rng, int k);

LedgerEntry step_num_iag(ServerState& server, std::span<WorkerNode> workers, double alpha,
                         const CounterRng& rng, int k);

struct RunConfig {
  Method method = Method::gd;
  TriggerParams trigger;  // alpha is used by every method; xi/depth by LAG
  int max_iters = 1;
  double target_eps = 1e-8;
  double reference_optimum = 0.0;
  std::uint64_t seed = 0;

  bool stop_on_target = true;
  std::optional<ModelVector> theta1;  // zero vector when unset
  double global_smoothness = 0.0;     // L, needed by the lemma checks
  std::vector<double> lyapunov_beta;  // track V^k when non-empty
  bool assert_lemmas = false;
  int drift_check_every = 100;
  double divergence_factor = 1e6;

  void validate() const;
};

struct TraceRow {
  int iteration = 0;
  double objective_error = 0.0;  // L(θ^{k+1}) − L(θ*)
  double grad_sq_norm = 0.0;     // ‖∇L(θ^{k+1})‖²
  long cum_uploads = 0;          // including the init round
  long cum_uploads_excl_init = 0;
  std::optional<double> lyapunov;  // V^{k+1}
};

/// Outcome of the optional runtime checks of the descent guarantees.
struct LemmaReport {
  long gd_descent_checks = 0;
  long gd_descent_violations = 0;
  long lag_descent_checks = 0;
  long lag_descent_violations = 0;
  long lyapunov_checks = 0;
  long lyapunov_violations = 0;
  long lazy_comm_checks = 0;
  long lazy_comm_violations = 0;
  long drift_checks = 0;
  long drift_violations = 0;
  double max_excess = 0.0;  // largest amount by which any inequality failed

  long total_violations() const {
    return gd_descent_violations + lag_descent_violations + lyapunov_violations +
           lazy_comm_violations + drift_violations;
  }
};

struct Trace {
  Method method = Method::gd;
  int workers = 0;
  double initial_objective_error = 0.0;
  double initial_grad_sq_norm = 0.0;
  std::optional<double> initial_lyapunov;
  std::vector<TraceRow> rows;
  CommLedger ledger;
  LemmaReport lemmas;
  ModelVector final_theta;
  bool reached_target = false;
  bool diverged = false;

  int iterations() const noexcept { return static_cast<int>(rows.size()); }
};

/// Objective blew up or became non-finite. Carries the trace up to that point.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, Trace partial)
      : Error(what), partial_(std::move(partial)) {}
  const Trace& partial_trace() const noexcept { return partial_; }

 private:
  Trace partial_;
};

/// Runs `config.method` until the optimality error reaches target_eps or
/// max_iters iterations have executed. Identical inputs give bit-identical traces.
Trace run(const RunConfig& config, std::span<WorkerNode> workers);

}  // namespace lagsim

#endif  // LAGSIM_ENGINE_HPP_
