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

// Command-line experiment runner.
//
// Exit codes: 0 success, 1 descent-check violations (--assert-lemmas),
// 2 configuration error, 3 divergence, 4 I/O error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lagsim/error.hpp"
#include "lagsim/experiment.hpp"

namespace {

constexpr int kExitLemmas = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

void print_table(const lagsim::ExperimentResult& result, const lagsim::ExperimentConfig& config) {
  std::printf("%-8s %10s %12s %14s %s\n", "method", "iters", "uploads", "final_error",
              config.record_timing ? "seconds" : "");
  for (const auto& o : result.outcomes) {
    const auto& t = o.trace;
    const bool init = config.count_init && lagsim::uses_init_round(o.method);
    const long uploads = config.count_init ? t.ledger.total_uploads()
                                           : t.ledger.total_uploads() - t.ledger.init_uploads();
    const double err = t.rows.empty() ? t.initial_objective_error : t.rows.back().objective_error;
    std::printf("%-8s %10d %12ld %14.6e", std::string(lagsim::to_string(o.method)).c_str(),
                t.iterations() + (init ? 1 : 0), uploads, err);
    if (config.record_timing) std::printf(" %.3f", o.wall_seconds);
    if (t.diverged) std::printf("  diverged");
    if (!t.reached_target && !t.diverged) std::printf("  (eps not reached)");
    std::printf("\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parameter-server simulator for lazily aggregated gradient methods"};
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  bool assert_lemmas = false;
  bool without_init = false;
  bool timing = false;
  app.add_option("config", config_path, "Experiment config file")->required();
  app.add_option("--seed", seed, "Override run.seed");
  app.add_option("--output-dir", output_dir, "Override run.output_dir");
  app.add_flag("--assert-lemmas", assert_lemmas, "Check the descent and lazy-communication bounds every iteration");
  auto* with_flag = app.add_flag("--with-init", "Count the initialization round in iteration and upload totals (default)");
  auto* without_flag = app.add_flag("--without-init", without_init, "Leave the initialization round out of the totals");
  with_flag->excludes(without_flag);
  app.add_flag("--timing", timing, "Report wall time (makes summaries run-dependent)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  lagsim::ExperimentConfig config;
  try {
    config = lagsim::load_config(config_path);
  } catch (const lagsim::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const lagsim::Error& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return kExitConfig;
  }
  if (seed) config.seed = *seed;
  if (output_dir) config.output_dir = *output_dir;
  config.assert_lemmas = assert_lemmas;
  config.count_init = !without_init;
  config.record_timing = timing;
  for (const auto& w : config.warnings) std::cerr << "warning: " << w << "\n";

  lagsim::ExperimentResult result;
  try {
    result = lagsim::run_experiment(config);
  } catch (const lagsim::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const lagsim::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const lagsim::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  print_table(result, config);
  if (result.any_diverged()) {
    for (const auto& o : result.outcomes) {
      if (o.trace.diverged) std::cerr << "error: " << o.divergence_message << "\n";
    }
    return kExitDivergence;
  }
  if (config.assert_lemmas && result.lemma_violations() > 0) {
    std::cerr << "error: " << result.lemma_violations() << " descent-check violations\n";
    return kExitLemmas;
  }
  return 0;
}
