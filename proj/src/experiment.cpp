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

#include "lagsim/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string_view>

#include "lagsim/analysis.hpp"
#include "lagsim/error.hpp"
#include "json.hpp"

namespace lagsim {
namespace {

using nlohmann::json;

constexpr std::string_view kTraceStamp = "# lagsim trace v1";
constexpr std::string_view kTraceHeader =
    "iteration,objective_error,grad_sq_norm,cum_uploads,lyapunov,cum_uploads_excl_init";
constexpr std::string_view kLedgerStamp = "# lagsim ledger v1";
constexpr std::string_view kEventsStamp = "# lagsim comm_events v1";
constexpr int kSummaryVersion = 1;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Location-aware view of one config value.
struct Field {
  std::string_view text;
  std::size_t line;
  std::size_t column;

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line, column); }

  double as_double() const {
    double v = 0.0;
    auto s = text;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
      fail("expected a number, got '" + std::string(text) + "'");
    }
    return v;
  }

  long long as_int() const {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
      fail("expected an integer, got '" + std::string(text) + "'");
    }
    return v;
  }

  int as_int32() const {
    const long long v = as_int();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      fail("integer out of range");
    }
    return static_cast<int>(v);
  }

  std::uint64_t as_u64() const {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
      fail("expected a non-negative integer, got '" + std::string(text) + "'");
    }
    return v;
  }

  bool as_bool() const {
    if (text == "true" || text == "yes" || text == "1") return true;
    if (text == "false" || text == "no" || text == "0") return false;
    fail("expected true or false, got '" + std::string(text) + "'");
  }

  std::vector<Field> as_list() const {
    std::vector<Field> items;
    std::size_t start = 0;
    while (start <= text.size()) {
      auto comma = text.find(',', start);
      if (comma == std::string_view::npos) comma = text.size();
      const auto raw = text.substr(start, comma - start);
      const auto item = trim(raw);
      const auto offset = start + (item.empty() ? 0 : raw.find(item.front()));
      if (item.empty()) Field{item, line, column + start}.fail("empty list item");
      items.push_back(Field{item, line, column + offset});
      start = comma + 1;
    }
    return items;
  }
};

using Handler = std::function<void(ExperimentConfig&, const Field&)>;

const std::map<std::string, Handler, std::less<>>& config_keys() {
  static const std::map<std::string, Handler, std::less<>> keys = {
      {"problem.kind",
       [](ExperimentConfig& c, const Field& f) {
         static const std::map<std::string_view, ProblemKind> kinds = {
             {"synthetic-square", ProblemKind::synthetic_square},
             {"synthetic-logistic", ProblemKind::synthetic_logistic},
             {"csv-square", ProblemKind::csv_square},
             {"csv-logistic", ProblemKind::csv_logistic}};
         auto it = kinds.find(f.text);
         if (it == kinds.end()) f.fail("unknown problem kind '" + std::string(f.text) + "'");
         c.problem = it->second;
       }},
      {"problem.workers", [](ExperimentConfig& c, const Field& f) { c.partition.workers = f.as_int32(); }},
      {"problem.samples_per_worker",
       [](ExperimentConfig& c, const Field& f) { c.synthetic.samples_per_worker = f.as_int32(); }},
      {"problem.features", [](ExperimentConfig& c, const Field& f) { c.synthetic.features = f.as_int32(); }},
      {"problem.regime",
       [](ExperimentConfig& c, const Field& f) {
         if (f.text == "increasing") {
           c.synthetic.regime = SmoothnessRegime::increasing;
         } else if (f.text == "uniform") {
           c.synthetic.regime = SmoothnessRegime::uniform;
         } else {
           f.fail("regime must be increasing or uniform");
         }
       }},
      {"problem.target_L",
       [](ExperimentConfig& c, const Field& f) {
         c.synthetic.target_smoothness.clear();
         for (const auto& item : f.as_list()) c.synthetic.target_smoothness.push_back(item.as_double());
       }},
      {"problem.l2_reg", [](ExperimentConfig& c, const Field& f) { c.l2_reg = f.as_double(); }},
      {"problem.noise_sigma",
       [](ExperimentConfig& c, const Field& f) { c.synthetic.noise_sigma = f.as_double(); }},
      {"data.path", [](ExperimentConfig& c, const Field& f) { c.data_path = std::string(f.text); }},
      {"data.label_column",
       [](ExperimentConfig& c, const Field& f) { c.csv.label_column = std::string(f.text); }},
      {"data.feature_columns",
       [](ExperimentConfig& c, const Field& f) {
         c.csv.feature_columns.clear();
         for (const auto& item : f.as_list()) c.csv.feature_columns.emplace_back(item.text);
       }},
      {"data.feature_cap", [](ExperimentConfig& c, const Field& f) { c.partition.feature_cap = f.as_int32(); }},
      {"data.shuffle", [](ExperimentConfig& c, const Field& f) { c.partition.shuffle = f.as_bool(); }},
      {"data.positive_label",
       [](ExperimentConfig& c, const Field& f) { c.csv.positive_label = f.as_double(); }},
      {"run.methods",
       [](ExperimentConfig& c, const Field& f) {
         c.methods.clear();
         for (const auto& item : f.as_list()) {
           auto m = parse_method(item.text);
           if (!m) item.fail("unknown method '" + std::string(item.text) + "'");
           if (std::find(c.methods.begin(), c.methods.end(), *m) != c.methods.end()) {
             c.warnings.push_back("line " + std::to_string(item.line) + ": method " +
                                  std::string(item.text) + " listed twice; running it once");
             continue;
           }
           c.methods.push_back(*m);
         }
       }},
      {"run.eps", [](ExperimentConfig& c, const Field& f) { c.eps = f.as_double(); }},
      {"run.max_iters", [](ExperimentConfig& c, const Field& f) { c.max_iters = f.as_int32(); }},
      {"run.seed", [](ExperimentConfig& c, const Field& f) { c.seed = f.as_u64(); }},
      {"run.output_dir", [](ExperimentConfig& c, const Field& f) { c.output_dir = std::string(f.text); }},
      {"run.stop_at_eps", [](ExperimentConfig& c, const Field& f) { c.stop_on_target = f.as_bool(); }},
      {"run.smoothness",
       [](ExperimentConfig& c, const Field& f) {
         if (f.text == "tight") {
           c.smoothness = GlobalSmoothness::tight;
         } else if (f.text == "sum") {
           c.smoothness = GlobalSmoothness::sum_of_locals;
         } else {
           f.fail("smoothness must be tight or sum");
         }
       }},
      {"trigger.D", [](ExperimentConfig& c, const Field& f) { c.depth = f.as_int32(); }},
      {"trigger.xi_wk", [](ExperimentConfig& c, const Field& f) { c.xi_wk = f.as_double(); }},
      {"trigger.xi_ps", [](ExperimentConfig& c, const Field& f) { c.xi_ps = f.as_double(); }},
      {"trigger.xi", [](ExperimentConfig& c, const Field& f) { c.xi = f.as_double(); }},
      {"trigger.schedule",
       [](ExperimentConfig& c, const Field& f) {
         if (f.text == "standard") {
           c.schedule = Schedule::standard;
         } else if (f.text == "theorem1") {
           c.schedule = Schedule::theorem1;
         } else if (f.text == "nonconvex") {
           c.schedule = Schedule::nonconvex;
         } else {
           f.fail("schedule must be standard, theorem1 or nonconvex");
         }
       }},
  };
  return keys;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

bool is_lag(Method m) { return m == Method::lag_wk || m == Method::lag_ps; }

}  // namespace

std::string_view to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::synthetic_square: return "synthetic-square";
    case ProblemKind::synthetic_logistic: return "synthetic-logistic";
    case ProblemKind::csv_square: return "csv-square";
    case ProblemKind::csv_logistic: return "csv-logistic";
  }
  return "?";
}

LossKind loss_kind(ProblemKind kind) {
  return kind == ProblemKind::synthetic_square || kind == ProblemKind::csv_square
             ? LossKind::square
             : LossKind::logistic;
}

bool is_synthetic(ProblemKind kind) {
  return kind == ProblemKind::synthetic_square || kind == ProblemKind::synthetic_logistic;
}

std::string_view to_string(Schedule schedule) {
  switch (schedule) {
    case Schedule::standard: return "standard";
    case Schedule::theorem1: return "theorem1";
    case Schedule::nonconvex: return "nonconvex";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw ParameterError("config: at least one method is required");
  if (!(eps > 0.0)) throw ParameterError("config: eps must be > 0");
  if (max_iters < 1) throw ParameterError("config: max_iters must be >= 1");
  if (depth < 1) throw ParameterError("config: D must be >= 1");
  if (partition.workers < 1) throw ParameterError("config: workers must be >= 1");
  if (l2_reg && *l2_reg < 0.0) throw ParameterError("config: l2_reg must be >= 0");
  if (xi_wk && *xi_wk < 0.0) throw ParameterError("config: xi_wk must be >= 0");
  if (xi_ps && *xi_ps < 0.0) throw ParameterError("config: xi_ps must be >= 0");
  if (xi && *xi < 0.0) throw ParameterError("config: xi must be >= 0");
  if (is_synthetic(problem)) {
    if (synthetic.samples_per_worker < 1 || synthetic.features < 1) {
      throw ParameterError("config: samples_per_worker and features must be >= 1");
    }
    if (!synthetic.target_smoothness.empty() &&
        synthetic.target_smoothness.size() != static_cast<std::size_t>(partition.workers)) {
      throw ParameterError("config: target_L needs one value per worker");
    }
  } else {
    if (data_path.empty()) throw ParameterError("config: csv problems need data.path");
    if (csv.label_column.empty()) throw ParameterError("config: csv problems need data.label_column");
  }
  if (schedule == Schedule::theorem1 && !(resolved_xi() > 0.0 && resolved_xi() * depth < 1.0)) {
    throw ParameterError("config: theorem1 schedule needs 0 < xi < 1/D");
  }
  if (schedule == Schedule::nonconvex && !(resolved_xi() * depth < 1.0)) {
    throw ParameterError("config: nonconvex schedule needs D*xi < 1");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config;
  config.partition.workers = 9;
  const auto& keys = config_keys();
  std::set<std::string, std::less<>> seen;
  std::string section;
  std::size_t line_no = 0;
  std::string_view rest(text);
  while (true) {
    ++line_no;
    const auto nl = rest.find('\n');
    std::string_view raw = rest.substr(0, nl);
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const auto line = trim(raw);
    const std::size_t indent = line.empty() ? 0 : raw.find(line.front());
    if (!line.empty()) {
      if (line.front() == '[') {
        if (line.back() != ']') throw ParseError("unterminated section header", line_no, indent + 1);
        section = std::string(trim(line.substr(1, line.size() - 2)));
        static const std::set<std::string_view> sections = {"problem", "data", "run", "trigger"};
        if (!sections.contains(section)) {
          throw ParseError("unknown section [" + section + "]", line_no, indent + 2);
        }
      } else {
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no, indent + 1);
        const auto key = trim(line.substr(0, eq));
        const auto value_raw = line.substr(eq + 1);
        const auto value = trim(value_raw);
        const std::size_t value_col =
            indent + eq + 2 + (value.empty() ? 0 : value_raw.find(value.front()));
        if (section.empty()) throw ParseError("key outside of any section", line_no, indent + 1);
        const std::string full = section + "." + std::string(key);
        auto it = keys.find(full);
        if (it == keys.end()) throw ParseError("unknown key '" + full + "'", line_no, indent + 1);
        if (!seen.insert(full).second) throw ParseError("duplicate key '" + full + "'", line_no, indent + 1);
        if (value.empty()) throw ParseError("missing value for '" + full + "'", line_no, value_col);
        it->second(config, Field{value, line_no, value_col});
      }
    }
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  if (!seen.contains("problem.kind")) throw ParseError("missing required key problem.kind", line_no, 0);
  if (!seen.contains("run.methods")) throw ParseError("missing required key run.methods", line_no, 0);
  config.synthetic.workers = config.partition.workers;
  try {
    config.validate();
  } catch (const ParameterError& e) {
    throw ParseError(e.what(), 0, 0);
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  ExperimentConfig config = parse_config(buffer.str());
  if (!is_synthetic(config.problem) && config.data_path.is_relative()) {
    config.data_path = path.parent_path() / config.data_path;
  }
  return config;
}

Problem build_problem(const ExperimentConfig& config) {
  config.validate();
  const LossKind kind = loss_kind(config.problem);
  const double l2 = config.l2_reg.value_or(default_l2_reg(kind));
  Problem problem;
  if (is_synthetic(config.problem)) {
    SyntheticSpec spec = config.synthetic;
    spec.workers = config.partition.workers;
    spec.seed = config.seed;
    spec.kind = kind;
    spec.l2_reg = l2;
    problem.models = gen_synthetic(spec);
  } else {
    CsvSchema schema = config.csv;
    schema.binary_labels = kind == LossKind::logistic;
    const CsvDataset dataset = load_csv(config.data_path, schema);
    PartitionSpec spec = config.partition;
    spec.shuffle_seed = config.seed;
    for (auto& shard : partition(dataset.data, spec)) problem.models.emplace_back(kind, std::move(shard), l2);
  }
  problem.smoothness = certify_smoothness(problem.models, config.smoothness);
  problem.strong_convexity = strong_convexity_constant(problem.models);
  problem.kappa = problem.strong_convexity > 0.0 ? problem.smoothness.global / problem.strong_convexity
                                                 : std::numeric_limits<double>::infinity();
  const ReferenceSolution reference = solve_reference(problem.models);
  problem.optimum = reference.objective;
  problem.optimum_converged = reference.converged;
  return problem;
}

RunConfig method_run_config(const ExperimentConfig& config, const Problem& problem, Method method) {
  const double big_l = problem.smoothness.global;
  const int workers = static_cast<int>(problem.models.size());
  RunConfig rc;
  rc.method = method;
  rc.max_iters = config.max_iters;
  rc.target_eps = config.eps;
  rc.reference_optimum = problem.optimum;
  rc.seed = config.seed;
  rc.stop_on_target = config.stop_on_target;
  rc.global_smoothness = big_l;
  rc.assert_lemmas = config.assert_lemmas;

  double alpha = 1.0 / big_l;
  double xi = 0.0;
  std::vector<double> beta;
  switch (config.schedule) {
    case Schedule::standard:
      xi = method == Method::lag_ps ? config.resolved_xi_ps() : config.resolved_xi_wk();
      break;
    case Schedule::theorem1: {
      const LyapunovSchedule s = schedule_theorem1(config.resolved_xi(), config.depth, big_l);
      alpha = s.alpha;
      xi = config.resolved_xi();
      beta = s.beta;
      break;
    }
    case Schedule::nonconvex: {
      xi = config.resolved_xi();
      const std::vector<double> xis(static_cast<std::size_t>(config.depth), xi);
      alpha = schedule_nonconvex(xis, big_l);
      beta = nonconvex_lyapunov_weights(xis, alpha);
      break;
    }
  }
  if (method == Method::cyc_iag || method == Method::num_iag) alpha = 1.0 / (workers * big_l);
  rc.trigger = uniform_trigger(config.depth, is_lag(method) ? xi : 0.0, alpha, workers);
  // The Lyapunov weights belong to the LAG step; GD is their ξ = 0 special case.
  if (is_lag(method) || method == Method::gd) rc.lyapunov_beta = beta;
  return rc;
}

bool ExperimentResult::any_diverged() const {
  return std::any_of(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.trace.diverged; });
}

long ExperimentResult::lemma_violations() const {
  long total = 0;
  for (const auto& o : outcomes) total += o.trace.lemmas.total_violations();
  return total;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw NumericError("format_double: conversion failed");
  return std::string(buf, ptr);
}

void emit_trace_csv(const Trace& trace, std::ostream& out) {
  out << kTraceStamp << '\n' << kTraceHeader << '\n';
  const long init = trace.ledger.init_uploads();
  out << 0 << ',' << format_double(trace.initial_objective_error) << ','
      << format_double(trace.initial_grad_sq_norm) << ',' << init << ','
      << (trace.initial_lyapunov ? format_double(*trace.initial_lyapunov) : "") << ',' << 0 << '\n';
  for (const TraceRow& row : trace.rows) {
    out << row.iteration << ',' << format_double(row.objective_error) << ','
        << format_double(row.grad_sq_norm) << ',' << row.cum_uploads << ','
        << (row.lyapunov ? format_double(*row.lyapunov) : "") << ',' << row.cum_uploads_excl_init
        << '\n';
  }
}

void emit_ledger_csv(const CommLedger& ledger, std::ostream& out) {
  out << kLedgerStamp << '\n' << "iteration,worker_id,uploaded,downloaded,evaluated\n";
  for (const LedgerEntry& e : ledger.entries()) {
    for (int id = 1; id <= ledger.workers(); ++id) {
      const bool up = std::binary_search(e.uploads.begin(), e.uploads.end(), id);
      const bool down = std::binary_search(e.downloads.begin(), e.downloads.end(), id);
      const bool eval = std::binary_search(e.grad_evals.begin(), e.grad_evals.end(), id);
      if (!up && !down && !eval) continue;
      out << e.iteration << ',' << id << ',' << int{up} << ',' << int{down} << ',' << int{eval} << '\n';
    }
  }
}

void emit_comm_events(const CommLedger& ledger, std::ostream& out) {
  out << kEventsStamp << '\n' << "iteration,worker_id\n";
  for (const LedgerEntry& e : ledger.entries()) {
    for (int id : e.uploads) out << e.iteration << ',' << id << '\n';
  }
}

std::vector<TraceRow> read_trace_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line.rfind("# lagsim trace ", 0) != 0) {
    throw ParseError("trace: missing schema stamp", 1, 1);
  }
  if (line != kTraceStamp) throw ParseError("trace: unsupported schema version '" + line + "'", 1, 1);
  ++line_no;
  if (!std::getline(in, line) || line != kTraceHeader) throw ParseError("trace: unexpected header", 2, 1);
  std::vector<TraceRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      cells.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (cells.size() != 6) throw ParseError("trace: expected 6 fields", line_no, 1);
    auto field = [&](std::size_t i) { return Field{cells[i], line_no, i + 1}; };
    TraceRow row;
    row.iteration = field(0).as_int32();
    row.objective_error = field(1).as_double();
    row.grad_sq_norm = field(2).as_double();
    row.cum_uploads = field(3).as_int();
    if (!cells[4].empty()) row.lyapunov = field(4).as_double();
    row.cum_uploads_excl_init = field(5).as_int();
    rows.push_back(row);
  }
  return rows;
}

std::string summary_json(const ExperimentConfig& config, const Problem& problem,
                         const MethodOutcome& outcome) {
  const Trace& trace = outcome.trace;
  const CommLedger& ledger = trace.ledger;
  const RunConfig rc = method_run_config(config, problem, outcome.method);
  const long init = ledger.init_uploads();
  const int iters = trace.iterations();
  const bool init_round = uses_init_round(outcome.method);
  const double final_error =
      trace.rows.empty() ? trace.initial_objective_error : trace.rows.back().objective_error;

  json s;
  s["schema_version"] = kSummaryVersion;
  s["method"] = std::string(to_string(outcome.method));
  s["workers"] = trace.workers;
  s["count_init"] = config.count_init;
  s["iterations"] = iters + (config.count_init && init_round ? 1 : 0);
  s["iterations_excl_init"] = iters;
  s["uploads"] = config.count_init ? ledger.total_uploads() : ledger.total_uploads() - init;
  s["uploads_incl_init"] = ledger.total_uploads();
  s["uploads_excl_init"] = ledger.total_uploads() - init;
  s["downloads"] = ledger.total_downloads();
  s["grad_evals"] = ledger.total_grad_evals();
  s["per_worker_uploads"] = ledger.per_worker_uploads();
  s["initial_objective_error"] = finite_or_null(trace.initial_objective_error);
  s["final_objective_error"] = finite_or_null(final_error);
  s["target_eps"] = config.eps;
  s["reached_target"] = trace.reached_target;
  s["diverged"] = trace.diverged;
  if (trace.diverged) s["divergence"] = outcome.divergence_message;

  // First trace row at or below each power of ten between the start and eps.
  json decades = json::array();
  if (trace.initial_objective_error > 0.0 && std::isfinite(trace.initial_objective_error)) {
    const int top = static_cast<int>(std::floor(std::log10(trace.initial_objective_error)));
    const int bottom = static_cast<int>(std::ceil(std::log10(config.eps) - 1e-12));
    std::size_t r = 0;
    for (int e = top; e >= bottom; --e) {
      const double level = std::pow(10.0, e);
      json entry;
      entry["eps"] = level;
      if (trace.initial_objective_error <= level) {
        entry["iteration"] = 0;
        entry["uploads"] = config.count_init ? init : 0;
        decades.push_back(entry);
        continue;
      }
      while (r < trace.rows.size() && trace.rows[r].objective_error > level) ++r;
      if (r < trace.rows.size()) {
        entry["iteration"] = trace.rows[r].iteration;
        entry["uploads"] = config.count_init ? trace.rows[r].cum_uploads : trace.rows[r].cum_uploads_excl_init;
      } else {
        entry["iteration"] = nullptr;
        entry["uploads"] = nullptr;
      }
      decades.push_back(entry);
    }
  }
  s["uploads_to_decade"] = decades;

  json b;
  b["global_smoothness"] = problem.smoothness.global;
  b["per_worker_smoothness"] = problem.smoothness.per_worker;
  b["strong_convexity"] = problem.strong_convexity;
  b["kappa"] = finite_or_null(problem.kappa);
  b["alpha"] = rc.trigger.alpha;
  b["schedule"] = std::string(to_string(config.schedule));
  b["reference_objective"] = problem.optimum;
  b["reference_converged"] = problem.optimum_converged;
  if (is_lag(outcome.method)) {
    const double big_l = problem.smoothness.global;
    const HeterogeneityProfile profile = make_profile(problem.smoothness.per_worker, big_l);
    const std::vector<double> gammas = gamma_thresholds(rc.trigger, big_l);
    json h = json::array();
    for (double g : gammas) h.push_back(heterogeneity_score(profile, g));
    b["D"] = rc.trigger.depth;
    b["xi"] = rc.trigger.xi.front();
    b["importance"] = profile.importance;
    b["gamma"] = gammas;
    b["heterogeneity"] = h;
    b["reduced_fraction"] = reduced_fraction(profile, gammas);
    const double measured_bound = comm_bound_for_iterations(profile, rc.trigger, big_l, iters);
    b["comm_bound_at_measured_iterations"] = measured_bound;
    b["comm_bound_holds"] = static_cast<double>(ledger.total_uploads() - init) <= measured_bound;
    json predicted = nullptr;
    if (config.schedule == Schedule::theorem1 && std::isfinite(problem.kappa) && config.eps < 1.0) {
      predicted = comm_bound_lag(profile, rc.trigger, big_l, problem.kappa, config.eps);
    }
    b["comm_bound_predicted"] = predicted;
    json nonconvex = nullptr;
    if (config.schedule == Schedule::nonconvex && trace.initial_lyapunov) {
      nonconvex = comm_bound_nonconvex(profile, rc.trigger, big_l, config.eps, *trace.initial_lyapunov);
    }
    b["comm_bound_nonconvex"] = nonconvex;
  }
  s["bounds"] = b;

  const LemmaReport& l = trace.lemmas;
  s["lemma_checks"] = {
      {"enabled", config.assert_lemmas},
      {"gd_descent", {{"checks", l.gd_descent_checks}, {"violations", l.gd_descent_violations}}},
      {"lag_descent", {{"checks", l.lag_descent_checks}, {"violations", l.lag_descent_violations}}},
      {"lyapunov", {{"checks", l.lyapunov_checks}, {"violations", l.lyapunov_violations}}},
      {"lazy_comm", {{"checks", l.lazy_comm_checks}, {"violations", l.lazy_comm_violations}}},
      {"drift", {{"checks", l.drift_checks}, {"violations", l.drift_violations}}},
      {"max_excess", l.max_excess},
  };
  if (config.record_timing) s["wall_time_seconds"] = outcome.wall_seconds;
  return s.dump(2) + "\n";
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const Problem problem = build_problem(config);
  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec) throw IoError("cannot create " + config.output_dir.string() + ": " + ec.message());

  json meta;
  meta["schema_version"] = kSummaryVersion;
  meta["problem"] = std::string(to_string(config.problem));
  meta["workers"] = problem.models.size();
  meta["dimension"] = problem.models.front().dim();
  meta["seed"] = config.seed;
  meta["eps"] = config.eps;
  meta["max_iters"] = config.max_iters;
  meta["D"] = config.depth;
  meta["schedule"] = std::string(to_string(config.schedule));
  meta["reference_objective"] = problem.optimum;
  json names = json::array();
  for (Method m : config.methods) names.push_back(std::string(to_string(m)));
  meta["methods"] = names;
  write_file(config.output_dir / "experiment.json", meta.dump(2) + "\n");

  ExperimentResult result;
  for (Method method : config.methods) {
    MethodOutcome outcome;
    outcome.method = method;
    std::vector<WorkerNode> workers = make_workers(problem.models);
    const RunConfig rc = method_run_config(config, problem, method);
    const auto start = std::chrono::steady_clock::now();
    try {
      outcome.trace = run(rc, workers);
    } catch (const DivergenceError& e) {
      outcome.trace = e.partial_trace();
      outcome.divergence_message = e.what();
    }
    outcome.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const auto dir = config.output_dir / std::string(to_string(method));
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    std::ostringstream trace_csv, ledger_csv, events_csv;
    emit_trace_csv(outcome.trace, trace_csv);
    emit_ledger_csv(outcome.trace.ledger, ledger_csv);
    emit_comm_events(outcome.trace.ledger, events_csv);
    write_file(dir / "trace.csv", trace_csv.str());
    write_file(dir / "ledger.csv", ledger_csv.str());
    write_file(dir / "comm_events.csv", events_csv.str());
    write_file(dir / "summary.json", summary_json(config, problem, outcome));
    result.outcomes.push_back(std::move(outcome));
  }
  return result;
}

}  // namespace lagsim
