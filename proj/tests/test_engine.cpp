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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lagsim/analysis.hpp"
#include "lagsim/datagen.hpp"
#include "test_util.hpp"

namespace lagsim {
namespace {

using testing::scalar_quadratic;

std::vector<WorkerNode> scalar_workers(std::initializer_list<double> curvatures) {
  std::vector<LossModel> models;
  for (double c : curvatures) models.push_back(scalar_quadratic(c));
  return make_workers(std::move(models));
}

std::vector<LossModel> small_problem(std::uint64_t seed, int workers = 4) {
  std::mt19937_64 gen(seed);
  std::vector<LossModel> models;
  for (int m = 0; m < workers; ++m) {
    models.push_back(testing::random_model(gen, LossKind::square, 8, 5));
  }
  return models;
}

RunConfig config_for(Method method, std::span<const LossModel> models, double xi = 0.1) {
  const auto cert = certify_smoothness(models);
  const auto ref = solve_reference(models);
  RunConfig c;
  c.method = method;
  double alpha = 1.0 / cert.global;
  if (method == Method::cyc_iag || method == Method::num_iag) alpha /= static_cast<double>(models.size());
  c.trigger = uniform_trigger(10, xi, alpha, static_cast<int>(models.size()));
  c.max_iters = 5000;
  c.target_eps = 1e-8;
  c.reference_optimum = ref.objective;
  c.global_smoothness = cert.global;
  c.seed = 99;
  return c;
}

TEST(StepGdTest, ExactFitLeavesThetaUnchanged) {
  auto workers = make_workers({LossModel(LossKind::square, DataMatrix(Matrix{{1, 2}}, {5}))});
  ServerState s{ModelVector{1, 2}, ModelVector::zeros(2), LagWindow(3), {ModelVector{1, 2}}};
  const auto entry = step_gd(s, workers, 0.1, 1);
  EXPECT_EQ(s.theta, (ModelVector{1, 2}));
  EXPECT_EQ(entry.uploads, (std::vector<int>{1}));
}

TEST(StepGdTest, ScalarContraction) {
  // Two shards of θ²/2 each: L(θ) = θ², L = 2.
  auto workers = scalar_workers({0.5, 0.5});
  const double alpha = 0.25;
  ServerState s{ModelVector{3.0}, ModelVector{0.0}, LagWindow(2), {ModelVector{3.0}, ModelVector{3.0}}};
  for (int k = 1; k <= 5; ++k) {
    const double before = s.theta[0];
    const auto entry = step_gd(s, workers, alpha, k);
    EXPECT_NEAR(s.theta[0], before * (1 - alpha * 2.0), 1e-15);
    EXPECT_EQ(entry.uploads.size(), 2u);
    EXPECT_EQ(entry.downloads.size(), 2u);
    EXPECT_EQ(entry.grad_evals.size(), 2u);
    EXPECT_NEAR(s.window.at(1), std::pow(before * alpha * 2.0, 2), 1e-15);
  }
}

TEST(InitRoundTest, FillsCachesAtStart) {
  const auto models = small_problem(1);
  auto workers = make_workers(models);
  std::mt19937_64 gen(2);
  const auto theta1 = testing::random_vector(gen, 5);
  auto [server, entry] = init_round(workers, theta1, 10);
  const auto full = total_grad(models, theta1);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(server.agg_grad[i], full[i], 1e-12);
  EXPECT_EQ(entry.iteration, 0);
  EXPECT_EQ(entry.uploads.size(), models.size());
  EXPECT_EQ(entry.downloads.size(), models.size());
  EXPECT_EQ(server.window.entries(), std::vector<double>(10, 0.0));
  for (const auto& w : workers) EXPECT_EQ(w.cached_theta, theta1);
  CommLedger ledger(static_cast<int>(models.size()));
  ledger.record(entry);
  EXPECT_EQ(ledger.total_uploads(), static_cast<long>(models.size()));
  EXPECT_EQ(ledger.init_uploads(), static_cast<long>(models.size()));
}

TEST(InitRoundTest, ZeroDataGivesZeroAggregate) {
  auto workers = make_workers({LossModel(LossKind::square, DataMatrix(Matrix(3, 2), {0, 0, 0}))});
  workers.front().smoothness = 1.0;
  auto [server, entry] = init_round(workers, ModelVector{1, -1}, 2);
  EXPECT_EQ(server.agg_grad, ModelVector::zeros(2));
}

TEST(StepLagWkTest, AllViolatorsMatchGdBitwise) {
  const auto models = small_problem(3);
  auto gd_workers = make_workers(models);
  auto lag_workers = make_workers(models);
  const ModelVector theta1 = ModelVector::constant(5, 0.5);
  auto [gd, e0] = init_round(gd_workers, theta1, 10);
  auto [lag, e1] = init_round(lag_workers, theta1, 10);
  const double alpha = 1.0 / certify_smoothness(models).global;
  const auto p = uniform_trigger(10, 0.0, alpha, 4);
  step_gd(gd, gd_workers, alpha, 1);
  step_lag_wk(lag, lag_workers, p, 1);  // every cache is fresh: all skip
  for (int k = 2; k <= 30; ++k) {
    step_gd(gd, gd_workers, alpha, k);
    const auto entry = step_lag_wk(lag, lag_workers, p, k);
    ASSERT_EQ(entry.uploads.size(), 4u);
    ASSERT_EQ(gd.theta, lag.theta) << "iteration " << k;
  }
}

TEST(StepLagWkTest, NoViolatorReusesAggregate) {
  const auto models = small_problem(4);
  auto workers = make_workers(models);
  auto [s, e] = init_round(workers, ModelVector::zeros(5), 3);
  const ModelVector agg = s.agg_grad;
  const ModelVector theta = s.theta;
  const auto entry = step_lag_wk(s, workers, uniform_trigger(3, 0.1, 0.01, 4), 1);
  EXPECT_TRUE(entry.uploads.empty());
  EXPECT_EQ(entry.downloads.size(), 4u);
  EXPECT_EQ(entry.grad_evals.size(), 4u);
  EXPECT_EQ(s.theta, axpy(-0.01, agg, theta));
}

TEST(StepLagWkTest, HandEvaluatedSplitSum) {
  // L_1 = θ², L_2 = 4θ² (scalar shards c = 1 and c = 4), caches at θ̂ = 1, θ^k = 0.9.
  auto workers = scalar_workers({1.0, 4.0});
  for (auto& w : workers) w.refresh(ModelVector{1.0});
  ServerState s{ModelVector{0.9}, ModelVector{2.0 + 8.0}, LagWindow(1), {ModelVector{1.0}, ModelVector{1.0}}};
  s.window.push(0.01);
  // RHS = ξ w / (α² M²) = 1·0.01/(0.01·4) = 0.25.
  // Worker 1: δ = 2·0.9 − 2 = −0.2, δ² = 0.04 ≤ 0.25, skips.
  // Worker 2: δ = 8·0.9 − 8 = −0.8, δ² = 0.64 > 0.25, uploads.
  const auto p = uniform_trigger(1, 1.0, 0.1, 2);
  const auto entry = step_lag_wk(s, workers, p, 5);
  EXPECT_EQ(entry.uploads, (std::vector<int>{2}));
  const double agg = 2.0 + 7.2;  // stale ∇L_1(1) + fresh ∇L_2(0.9)
  EXPECT_NEAR(s.agg_grad[0], agg, 1e-14);
  EXPECT_NEAR(s.theta[0], 0.9 - 0.1 * agg, 1e-14);
  EXPECT_EQ(workers[0].cached_theta, ModelVector{1.0});
  EXPECT_EQ(workers[1].cached_theta, ModelVector{0.9});
}

TEST(StepLagPsTest, FirstRoundAfterMoveIsFull) {
  const auto models = small_problem(5);
  auto workers = make_workers(models);
  auto [s, e] = init_round(workers, ModelVector::zeros(5), 10);
  s.theta = ModelVector::constant(5, 0.1);  // θ¹ ≠ θ̂⁰, window still empty
  const auto entry = step_lag_ps(s, workers, uniform_trigger(10, 1.0, 0.01, 4), 1);
  EXPECT_EQ(entry.uploads.size(), 4u);
  EXPECT_EQ(entry.downloads.size(), 4u);
}

TEST(StepLagPsTest, FreshCachesMeanNoContact) {
  const auto models = small_problem(6);
  auto workers = make_workers(models);
  auto [s, e] = init_round(workers, ModelVector::zeros(5), 2);
  s.window.push(1.0);
  const auto entry = step_lag_ps(s, workers, uniform_trigger(2, 0.5, 0.01, 4), 3);
  EXPECT_TRUE(entry.uploads.empty());
  EXPECT_TRUE(entry.downloads.empty());
  EXPECT_TRUE(entry.grad_evals.empty());
}

TEST(StepLagPsTest, SmoothWorkerSkipsStiffWorkerUploads) {
  // L_1 = 0.2, L_2 = 20; ‖θ̂ − θ‖² = 0.01; RHS = 1·0.04/(0.01·4) = 1.
  // LHS_1 = 0.04·0.01 = 4e−4 skips, LHS_2 = 400·0.01 = 4 uploads.
  auto workers = scalar_workers({0.1, 10.0});
  for (auto& w : workers) w.refresh(ModelVector{1.0});
  ServerState s{ModelVector{0.9}, ModelVector{0.2 + 20.0}, LagWindow(1), {ModelVector{1.0}, ModelVector{1.0}}};
  s.window.push(0.04);
  const auto p = uniform_trigger(1, 1.0, 0.1, 2);
  EXPECT_NEAR(workers[0].smoothness, 0.2, 1e-12);
  EXPECT_NEAR(workers[1].smoothness, 20.0, 1e-12);
  const auto entry = step_lag_ps(s, workers, p, 2);
  EXPECT_EQ(entry.uploads, (std::vector<int>{2}));
  EXPECT_EQ(entry.downloads, (std::vector<int>{2}));
  EXPECT_EQ(s.ps_cached_thetas[0], ModelVector{1.0});
  EXPECT_EQ(s.ps_cached_thetas[1], ModelVector{0.9});
  EXPECT_NEAR(s.agg_grad[0], 0.2 + 18.0, 1e-13);
}

TEST(StepCycIagTest, CyclesThroughWorkers) {
  const auto models = small_problem(7, 3);
  auto workers = make_workers(models);
  auto [s, e] = init_round(workers, ModelVector::zeros(5), 2);
  std::vector<int> order;
  for (int k = 1; k <= 7; ++k) order.push_back(step_cyc_iag(s, workers, 0.001, k).uploads.at(0));
  EXPECT_EQ(order, (std::vector<int>{1, 2, 3, 1, 2, 3, 1}));
}

TEST(StepCycIagTest, SingleWorkerMatchesGd) {
  const auto models = small_problem(8, 1);
  auto c_workers = make_workers(models);
  auto g_workers = make_workers(models);
  auto [c, e0] = init_round(c_workers, ModelVector::zeros(5), 2);
  ServerState g{ModelVector::zeros(5), ModelVector::zeros(5), LagWindow(2), {ModelVector::zeros(5)}};
  const double alpha = 1.0 / certify_smoothness(models).global;
  for (int k = 1; k <= 20; ++k) {
    step_cyc_iag(c, c_workers, alpha, k);
    step_gd(g, g_workers, alpha, k);
    ASSERT_EQ(c.theta, g.theta);
  }
}

TEST(NumIagTest, SelectionFrequencies) {
  const CounterRng rng(2024);
  auto check = [&](std::vector<double> lms) {
    std::vector<LossModel> models;
    double total = 0.0;
    for (double l : lms) {
      models.push_back(scalar_quadratic(l / 2.0));
      total += l;
    }
    const auto workers = make_workers(std::move(models));
    const int draws = 10'000;
    std::vector<int> counts(lms.size());
    for (int k = 1; k <= draws; ++k) ++counts[num_iag_pick(workers, rng, k)];
    for (std::size_t i = 0; i < lms.size(); ++i) {
      const double p = lms[i] / total;
      const double sigma = std::sqrt(draws * p * (1 - p));
      EXPECT_LE(std::abs(counts[i] - draws * p), 3 * sigma + 1e-9) << "worker " << i + 1;
    }
  };
  check({1.0, 1.0, 1.0, 1.0, 1.0});
  check({1.0, 9.0});
  check({3.0});
}

TEST(NumIagTest, CounterRngIsPureFunction) {
  const CounterRng a(5), b(5), c(6);
  EXPECT_EQ(a.bits(17), b.bits(17));
  EXPECT_NE(a.bits(17), c.bits(17));
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const double u = a.uniform(k);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(CommLedgerTest, UploadRequiresEvaluation) {
  CommLedger ledger(3);
  EXPECT_THROW(ledger.record({1, {2}, {2}, {1}}), ParameterError);
  EXPECT_THROW(ledger.record({1, {4}, {4}, {4}}), ParameterError);
  ledger.record({0, {1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
  ledger.record({1, {2}, {1, 2, 3}, {1, 2, 3}});
  EXPECT_EQ(ledger.total_uploads(), 4);
  EXPECT_EQ(ledger.init_uploads(), 3);
  EXPECT_EQ(ledger.uploads_of(2), 2);
  EXPECT_EQ(ledger.total_downloads(), 6);
}

TEST(RunTest, ConfigValidation) {
  const auto models = small_problem(9);
  auto workers = make_workers(models);
  auto c = config_for(Method::gd, models);
  c.max_iters = 0;
  EXPECT_THROW(run(c, workers), ParameterError);
  c.max_iters = 1;
  c.target_eps = 0.0;
  EXPECT_THROW(run(c, workers), ParameterError);
  c.target_eps = 1e-8;
  const auto trace = run(c, workers);
  EXPECT_EQ(trace.iterations(), 1);
  EXPECT_EQ(trace.rows.front().cum_uploads, 4);
}

TEST(RunTest, GdMeetsLinearRateIterationBound) {
  const auto models = small_problem(10);
  auto workers = make_workers(models);
  const auto c = config_for(Method::gd, models);
  const auto cond = conditioning(models);
  const auto trace = run(c, workers);
  ASSERT_TRUE(trace.reached_target);
  const double bound = std::ceil(cond.kappa * std::log(trace.initial_objective_error / c.target_eps)) + 2;
  EXPECT_LE(trace.iterations(), bound);
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    EXPECT_EQ(trace.rows[i].cum_uploads, 4 * static_cast<long>(i + 1));
    if (i > 0) EXPECT_LT(trace.rows[i].objective_error, trace.rows[i - 1].objective_error);
  }
}

TEST(RunTest, LagWithZeroWeightsIsGd) {
  const auto models = small_problem(11);
  auto gd_workers = make_workers(models);
  auto lag_workers = make_workers(models);
  auto gd_cfg = config_for(Method::gd, models);
  auto lag_cfg = config_for(Method::lag_wk, models, 0.0);
  const auto gd = run(gd_cfg, gd_workers);
  const auto lag = run(lag_cfg, lag_workers);
  // The init round supplies the first step's gradients, so the iterates line up.
  ASSERT_EQ(lag.iterations(), gd.iterations());
  EXPECT_EQ(lag.rows.front().cum_uploads_excl_init, 0);
  for (std::size_t i = 0; i < gd.rows.size(); ++i) {
    EXPECT_EQ(lag.rows[i].objective_error, gd.rows[i].objective_error);
    EXPECT_EQ(lag.rows[i].cum_uploads, gd.rows[i].cum_uploads);
  }
  EXPECT_EQ(lag.final_theta, gd.final_theta);
}

TEST(RunTest, EveryMethodConvergesWithCleanLemmaChecks) {
  const auto models = small_problem(12);
  for (Method m : {Method::gd, Method::lag_wk, Method::lag_ps, Method::cyc_iag, Method::num_iag}) {
    auto workers = make_workers(models);
    auto c = config_for(m, models, 0.1);
    c.max_iters = 200'000;
    c.assert_lemmas = true;
    Trace trace;
    try {
      trace = run(c, workers);
    } catch (const DivergenceError& e) {
      ADD_FAILURE() << to_string(m) << ": " << e.what();
      continue;
    }
    EXPECT_TRUE(trace.reached_target) << to_string(m);
    EXPECT_EQ(trace.lemmas.total_violations(), 0) << to_string(m);
    const long per_iter_max = (m == Method::cyc_iag || m == Method::num_iag) ? 1 : 4;
    const long init = uses_init_round(m) ? 4 : 0;
    EXPECT_LE(trace.ledger.total_uploads(), per_iter_max * trace.iterations() + init);
    if (per_iter_max == 1) EXPECT_EQ(trace.ledger.total_uploads(), trace.iterations() + init);
  }
}

TEST(RunTest, Theorem1ScheduleKeepsLyapunovMonotone) {
  const auto models = small_problem(13);
  const auto cert = certify_smoothness(models);
  for (Method m : {Method::lag_wk, Method::lag_ps}) {
    auto workers = make_workers(models);
    auto c = config_for(m, models);
    const auto s = schedule_theorem1(0.05, 10, cert.global);
    c.trigger = uniform_trigger(10, 0.05, s.alpha, 4);
    c.lyapunov_beta = s.beta;
    c.assert_lemmas = true;
    c.max_iters = 100'000;
    const auto trace = run(c, workers);
    EXPECT_TRUE(trace.reached_target);
    EXPECT_GT(trace.lemmas.lyapunov_checks, 0);
    EXPECT_EQ(trace.lemmas.total_violations(), 0) << to_string(m);
    double prev = *trace.initial_lyapunov;
    for (const auto& row : trace.rows) {
      EXPECT_LE(*row.lyapunov, prev + 1e-9);
      prev = *row.lyapunov;
    }
  }
}

TEST(RunTest, DeterministicTraces) {
  const auto models = small_problem(14);
  for (Method m : {Method::lag_ps, Method::num_iag}) {
    auto w1 = make_workers(models);
    auto w2 = make_workers(models);
    const auto c = config_for(m, models, 1.0);
    const auto a = run(c, w1);
    const auto b = run(c, w2);
    ASSERT_EQ(a.iterations(), b.iterations());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      EXPECT_EQ(a.rows[i].objective_error, b.rows[i].objective_error);
      EXPECT_EQ(a.rows[i].cum_uploads, b.rows[i].cum_uploads);
    }
  }
}

TEST(RunTest, DivergenceCarriesPartialTrace) {
  const auto models = small_problem(15);
  auto workers = make_workers(models);
  auto c = config_for(Method::gd, models);
  c.trigger.alpha = 10.0 / c.global_smoothness;
  try {
    run(c, workers);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_TRUE(e.partial_trace().diverged);
    EXPECT_GT(e.partial_trace().iterations(), 0);
  }
}

TEST(RunTest, StartAtOptimumReturnsImmediately) {
  const std::vector<LossModel> models{LossModel(LossKind::square, DataMatrix(Matrix{{1}}, {0}))};
  auto workers = make_workers(models);
  auto c = config_for(Method::lag_wk, models);
  const auto trace = run(c, workers);
  EXPECT_TRUE(trace.reached_target);
  EXPECT_EQ(trace.iterations(), 0);
}

TEST(MethodNamesTest, RoundTrip) {
  for (Method m : {Method::gd, Method::lag_wk, Method::lag_ps, Method::cyc_iag, Method::num_iag}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_FALSE(parse_method("sgd").has_value());
}

}  // namespace
}  // namespace lagsim
