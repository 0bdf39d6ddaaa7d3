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

// Experiment runner: a small `key = value` config format, orchestration of
// one simulation per method, and the CSV/JSON artifacts each run leaves on disk.

#ifndef LAGSIM_EXPERIMENT_HPP_
#define LAGSIM_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lagsim/datagen.hpp"
#include "lagsim/engine.hpp"
#include "lagsim/losses.hpp"

namespace lagsim {

enum class ProblemKind { synthetic_square, synthetic_logistic, csv_square, csv_logistic };

std::string_view to_string(ProblemKind kind);
LossKind loss_kind(ProblemKind kind);
bool is_synthetic(ProblemKind kind);

/// How stepsizes and trigger weights are chosen.
enum class Schedule {
  standard,   // α = 1/L (1/(ML) for the IAG baselines), ξ = xi_wk or xi_ps
  theorem1,   // α = (1 − √(Dξ))/L with uniform ξ and Lyapunov weights
  nonconvex,  // α = (1 − Dξ)/L with uniform ξ and Lyapunov weights
};

std::string_view to_string(Schedule schedule);

struct ExperimentConfig {
  ProblemKind problem = ProblemKind::synthetic_square;
  SyntheticSpec synthetic;  // seed is overwritten by `seed`
  std::filesystem::path data_path;
  CsvSchema csv;
  PartitionSpec partition;  // workers doubles as the synthetic worker count
  std::optional<double> l2_reg;  // loss default when unset

  std::vector<Method> methods;
  double eps = 1e-8;
  int max_iters = 100'000;
  std::uint64_t seed = 2018;
  std::filesystem::path output_dir = "lagsim_out";
  GlobalSmoothness smoothness = GlobalSmoothness::tight;
  bool stop_on_target = true;

  int depth = 10;
  std::optional<double> xi_wk;  // standard schedule, default 1/D
  std::optional<double> xi_ps;  // standard schedule, default 10/D
  std::optional<double> xi;     // theorem1/nonconvex, default 1/(2D)
  Schedule schedule = Schedule::standard;

  bool assert_lemmas = false;
  bool count_init = true;  // headline iteration/upload counts include the init round
  bool record_timing = false;

  std::vector<std::string> warnings;  // non-fatal notes from parsing

  double resolved_xi_wk() const { return xi_wk.value_or(1.0 / depth); }
  double resolved_xi_ps() const { return xi_ps.value_or(10.0 / depth); }
  double resolved_xi() const { return xi.value_or(1.0 / (2.0 * depth)); }

  // Throws ParameterError on inconsistent values.
  void validate() const;
};

/// Parses the config text. Errors carry the offending line and column.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Shared state of one experiment: the per-worker losses and the constants
/// every method is measured against.
struct Problem {
  std::vector<LossModel> models;
  SmoothnessCert smoothness;
  double strong_convexity = 0.0;
  double kappa = 0.0;
  double optimum = 0.0;  // L(θ*)
  bool optimum_converged = true;
};

Problem build_problem(const ExperimentConfig& config);

/// The engine configuration the experiment uses for `method`.
RunConfig method_run_config(const ExperimentConfig& config, const Problem& problem, Method method);

struct MethodOutcome {
  Method method = Method::gd;
  Trace trace;
  std::string divergence_message;  // empty unless the run diverged
  double wall_seconds = 0.0;
};

struct ExperimentResult {
  std::vector<MethodOutcome> outcomes;
  bool any_diverged() const;
  long lemma_violations() const;
};

/// Runs every method and writes <output_dir>/<method>/{trace.csv, ledger.csv,
/// comm_events.csv, summary.json} plus <output_dir>/experiment.json.
/// Throws IoError when the files cannot be written.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Artifact writers. All numbers use the shortest round-trip decimal form.
void emit_trace_csv(const Trace& trace, std::ostream& out);
void emit_ledger_csv(const CommLedger& ledger, std::ostream& out);
void emit_comm_events(const CommLedger& ledger, std::ostream& out);
std::string summary_json(const ExperimentConfig& config, const Problem& problem,
                         const MethodOutcome& outcome);

/// Reads a trace CSV back. Rejects files stamped with another schema version.
/// Row 0 carries the state before the first iteration.
std::vector<TraceRow> read_trace_csv(const std::string& text);

// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace lagsim

#endif  // LAGSIM_EXPERIMENT_HPP_
