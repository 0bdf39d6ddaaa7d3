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

#include "lagsim/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string_view>

#include "lagsim/error.hpp"

namespace lagsim {
namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// std::normal_distribution is implementation-defined; Box–Muller over
// mt19937_64 keeps shards identical across standard libraries.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : gen_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - unit();  // (0, 1]
    const double u2 = unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

 private:
  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

double curvature_weight(LossKind kind) { return kind == LossKind::square ? 2.0 : 0.25; }

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::optional<double> parse_number(std::string_view cell) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

std::size_t resolve_column(const std::string& ref, const std::vector<std::string>& header,
                           std::size_t width) {
  auto it = std::find(header.begin(), header.end(), ref);
  if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
  std::size_t index = 0;
  const auto [ptr, ec] = std::from_chars(ref.data(), ref.data() + ref.size(), index);
  if (ec != std::errc() || ptr != ref.data() + ref.size() || index >= width) {
    throw ParseError("unknown column '" + ref + "'", 1, 0);
  }
  return index;
}

}  // namespace

std::vector<double> default_target_smoothness(SmoothnessRegime regime, int workers) {
  std::vector<double> targets(static_cast<std::size_t>(std::max(workers, 0)));
  for (int m = 1; m <= workers; ++m) {
    targets[m - 1] = regime == SmoothnessRegime::increasing
                         ? std::pow(std::pow(1.3, m - 1) + 1.0, 2.0)
                         : 4.0;
  }
  return targets;
}

std::vector<LossModel> gen_synthetic(const SyntheticSpec& spec) {
  if (spec.workers < 1 || spec.samples_per_worker < 1 || spec.features < 1) {
    throw GenerationError("gen_synthetic: workers, samples and features must be >= 1");
  }
  const auto targets = spec.target_smoothness.empty()
                           ? default_target_smoothness(spec.regime, spec.workers)
                           : spec.target_smoothness;
  if (targets.size() != static_cast<std::size_t>(spec.workers)) {
    throw GenerationError("gen_synthetic: need one target smoothness constant per worker");
  }
  const auto n = static_cast<std::size_t>(spec.samples_per_worker);
  const auto d = static_cast<std::size_t>(spec.features);
  const double theta_true = 1.0 / std::sqrt(static_cast<double>(d));

  std::vector<LossModel> models;
  models.reserve(targets.size());
  for (std::size_t m = 0; m < targets.size(); ++m) {
    const double target = targets[m];
    if (!(target > spec.l2_reg) || !std::isfinite(target)) {
      throw GenerationError("gen_synthetic: target L_m must be positive and exceed the l2 weight");
    }
    GaussianSource source(mix(spec.seed) ^ mix(static_cast<std::uint64_t>(m) + 1));
    std::vector<double> x(n * d);
    for (double& v : x) v = source.next();

    const double top = spectral_norm_sym(DataMatrix(Matrix(n, d, x), std::vector<double>(n)).gram());
    if (!(top > 0.0)) throw GenerationError("gen_synthetic: shard has a zero Gram matrix");
    const double scale =
        std::sqrt((target - spec.l2_reg) / (curvature_weight(spec.kind) * top));
    for (double& v : x) v *= scale;

    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double signal = 0.0;
      for (std::size_t j = 0; j < d; ++j) signal += x[i * d + j] * theta_true;
      const double noisy = signal + spec.noise_sigma * source.next();
      y[i] = spec.kind == LossKind::square ? noisy : (noisy >= 0.0 ? 1.0 : -1.0);
    }
    LossModel model(spec.kind, DataMatrix(Matrix(n, d, std::move(x)), std::move(y)), spec.l2_reg);
    const double achieved = smoothness_constant(model);
    if (std::abs(achieved - target) > 1e-8 * target) {
      throw GenerationError("gen_synthetic: rescaling missed the target smoothness for worker " +
                            std::to_string(m + 1));
    }
    models.push_back(std::move(model));
  }
  return models;
}

CsvDataset parse_csv(const std::string& text, const CsvSchema& schema, const std::string& source) {
  std::vector<std::pair<std::size_t, std::string_view>> lines;
  {
    std::string_view rest(text);
    std::size_t number = 0;
    while (!rest.empty()) {
      ++number;
      const auto nl = rest.find('\n');
      const auto line = rest.substr(0, nl);
      if (!trim(line).empty()) lines.emplace_back(number, line);
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }
  if (lines.empty()) throw ParseError(source + ": no data rows", 0, 0);

  CsvDataset out;
  std::vector<std::string> header;
  const auto first = split_row(lines.front().second);
  const std::size_t width = first.size();
  for (auto cell : first) {
    if (!parse_number(cell)) {
      out.had_header = true;
      break;
    }
  }
  if (out.had_header) {
    for (auto cell : first) header.emplace_back(cell);
  }

  if (schema.label_column.empty()) throw ParseError(source + ": no label column given", 0, 0);
  const std::size_t label_col = resolve_column(schema.label_column, header, width);
  std::vector<std::size_t> feature_cols;
  if (schema.feature_columns.empty()) {
    for (std::size_t c = 0; c < width; ++c) {
      if (c != label_col) feature_cols.push_back(c);
    }
  } else {
    for (const auto& ref : schema.feature_columns) {
      feature_cols.push_back(resolve_column(ref, header, width));
    }
  }
  for (std::size_t c : feature_cols) {
    out.feature_names.push_back(out.had_header ? header[c] : std::to_string(c));
  }

  const std::size_t d = feature_cols.size();
  std::vector<double> features;
  std::vector<double> labels;
  for (std::size_t i = out.had_header ? 1 : 0; i < lines.size(); ++i) {
    const auto [line_no, line] = lines[i];
    const auto cells = split_row(line);
    if (cells.size() != width) {
      throw ParseError(source + ": expected " + std::to_string(width) + " fields, found " +
                           std::to_string(cells.size()),
                       line_no, 0);
    }
    auto number_at = [&, line_no = line_no](std::size_t c) {
      auto v = parse_number(cells[c]);
      if (!v) {
        throw ParseError(source + ": non-numeric value '" + std::string(cells[c]) + "'", line_no,
                         c + 1);
      }
      return *v;
    };
    labels.push_back(number_at(label_col));
    for (std::size_t c : feature_cols) features.push_back(number_at(c));
  }
  const std::size_t n = labels.size();
  if (n == 0) throw ParseError(source + ": no data rows", 0, 0);

  if (schema.binary_labels) {
    const std::set<double> classes(labels.begin(), labels.end());
    double positive;
    if (schema.positive_label) {
      positive = *schema.positive_label;
    } else if (classes.size() == 2) {
      positive = *classes.rbegin();
    } else {
      throw ParseError(source + ": " + std::to_string(classes.size()) +
                           " label classes; set a positive label",
                       0, 0);
    }
    for (double& y : labels) y = (y == positive) ? 1.0 : -1.0;
  }

  out.transform.mean.assign(d, 0.0);
  out.transform.stddev.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += features[i * d + j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = features[i * d + j] - mean;
      var += e * e;
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    out.transform.mean[j] = mean;
    out.transform.stddev[j] = sd;
    for (std::size_t i = 0; i < n; ++i) {
      double& v = features[i * d + j];
      v = sd > 0.0 ? (v - mean) / sd : 0.0;
    }
  }
  out.data = DataMatrix(Matrix(n, d, std::move(features)), std::move(labels));
  return out;
}

CsvDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_csv: cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), schema, path.string());
}

std::vector<DataMatrix> partition(const DataMatrix& data, const PartitionSpec& spec) {
  const std::size_t n = data.samples();
  if (spec.workers < 1) throw PartitionError("partition: need at least one worker");
  const auto m = static_cast<std::size_t>(spec.workers);
  if (m > n) {
    throw PartitionError("partition: " + std::to_string(m) + " workers for " + std::to_string(n) +
                         " rows");
  }
  if (spec.feature_cap < 0) throw PartitionError("partition: feature cap must be >= 0");
  const std::size_t d_in = data.features_dim();
  const std::size_t d = spec.feature_cap == 0 ? d_in
                                              : std::min(d_in, static_cast<std::size_t>(spec.feature_cap));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (spec.shuffle) {
    std::mt19937_64 gen(spec.shuffle_seed);
    for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[gen() % (i + 1)]);
  }

  const std::size_t base = n / m;
  std::vector<DataMatrix> shards;
  shards.reserve(m);
  std::size_t next = 0;
  for (std::size_t s = 0; s < m; ++s) {
    const std::size_t rows = s + 1 == m ? n - base * (m - 1) : base;
    std::vector<double> x;
    std::vector<double> y;
    x.reserve(rows * d);
    for (std::size_t r = 0; r < rows; ++r, ++next) {
      const std::size_t src = order[next];
      const auto row = data.features().row(src);
      x.insert(x.end(), row.begin(), row.begin() + static_cast<std::ptrdiff_t>(d));
      y.push_back(data.labels()[src]);
    }
    shards.emplace_back(Matrix(rows, d, std::move(x)), std::move(y));
  }
  return shards;
}

}  // namespace lagsim
