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

// Synthetic shards with prescribed smoothness constants, CSV ingestion and
// per-worker partitioning.

#ifndef LAGSIM_DATAGEN_HPP_
#define LAGSIM_DATAGEN_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lagsim/losses.hpp"
#include "lagsim/numeric.hpp"

namespace lagsim {

enum class SmoothnessRegime {
  increasing,  // L_m = (1.3^{m−1} + 1)²
  uniform,     // L_m = 4
};

/// Default per-worker targets for a regime.
std::vector<double> default_target_smoothness(SmoothnessRegime regime, int workers);

struct SyntheticSpec {
  int workers = 9;
  int samples_per_worker = 50;
  int features = 50;
  SmoothnessRegime regime = SmoothnessRegime::increasing;
  std::vector<double> target_smoothness;  // empty: regime default
  std::uint64_t seed = 2018;
  LossKind kind = LossKind::square;
  double l2_reg = 0.0;
  double noise_sigma = 0.1;
};

/// One loss model per worker.
///
/// Features are standard normal, then each shard is scaled by the single
/// factor that puts its smoothness constant on the requested target.
/// Labels use θ_true = 1/√d: y = xᵀθ_true + σ·noise for square losses and
/// y = sign(xᵀθ_true + σ·noise) for logistic ones.
std::vector<LossModel> gen_synthetic(const SyntheticSpec& spec);

struct CsvSchema {
  // Column references are 0-based indices or, when the file has a header, names.
  std::string label_column;
  std::vector<std::string> feature_columns;  // empty: every column except the label
  bool binary_labels = false;                // map labels to ±1
  std::optional<double> positive_label;      // needed when there are more than two classes
};

struct Standardization {
  std::vector<double> mean;
  std::vector<double> stddev;  // 0 for constant columns, which map to all zeros
};

struct CsvDataset {
  DataMatrix data;
  Standardization transform;
  std::vector<std::string> feature_names;
  bool had_header = false;
};

/// Reads a comma-separated file. A non-numeric first line is taken as a header.
/// Features are standardized per column.
CsvDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);

// Same, from in-memory text. `source` only labels error messages.
CsvDataset parse_csv(const std::string& text, const CsvSchema& schema,
                     const std::string& source = "<memory>");

struct PartitionSpec {
  int workers = 1;
  int feature_cap = 0;  // keep the first `feature_cap` columns; 0 keeps all
  bool shuffle = false;
  std::uint64_t shuffle_seed = 0;
};

/// Contiguous even split. The last shard takes the remainder rows.
std::vector<DataMatrix> partition(const DataMatrix& data, const PartitionSpec& spec);

}  // namespace lagsim

#endif  // LAGSIM_DATAGEN_HPP_
