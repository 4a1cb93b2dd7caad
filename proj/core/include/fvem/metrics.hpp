// Copyright 2026 The fvem Authors
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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <vector>

#include "fvem/data.hpp"
#include "fvem/federation.hpp"
#include "fvem/mlp.hpp"
#include "fvem/partition.hpp"
#include "fvem/report.hpp"

namespace fvem {

struct Snapshot {
  std::vector<double> confidence_ratios;  ///< tau_j / sum tau
  std::vector<double> model_deviations;   ///< ||mu_j - w||^2 / d
};

Snapshot stats_snapshot(const std::vector<ClientState>& clients, std::span<const double> w);

/// Fraction of matching entries; nullopt when empty.
std::optional<double> accuracy(std::span<const int> predicted, std::span<const int> labels);

/// Test-side mirror of a partition: each client is scored only on the test
/// points of the labels or subclasses it holds.
struct Evaluator {
  const Dataset* test = nullptr;
  std::vector<std::vector<std::size_t>> client_test;
  /// 0 scores personal models with the posterior mean; otherwise the
  /// softmax is averaged over this many posterior samples.
  std::size_t pm_mc_samples = 0;
  std::uint64_t seed = 0;

  static Evaluator build(const Dataset& test, const Partition& partition);
};

/// Personal model: head mu_j on top of the broadcast base.
std::optional<double> evaluate_pm(const ClientState& client, const BaseLayers& theta,
                                  const Dataset& test, std::span<const std::size_t> test_indices);
/// Global model (w, theta) on the full test set.
double evaluate_gm(const GlobalState& global, const Dataset& test);

/// Fills gm_accuracy and pm_accuracies, pushing the test set through the
/// base only once.
void evaluate_round(const GlobalState& global, const std::vector<ClientState>& clients,
                    const Evaluator& eval, RoundReport& report);

/// Per-client accuracy of fixed predictions on the full test set.
std::vector<ClientAccuracy> per_client_accuracy(std::span<const int> predictions,
                                                const Evaluator& eval,
                                                std::span<const std::size_t> sizes);

double mean(std::span<const double> values);
/// Sample standard deviation over sqrt(n); nullopt for fewer than two values.
std::optional<double> sem(std::span<const double> values);

struct SeedReports {
  std::uint64_t seed = 0;
  std::vector<RoundReport> rounds;

  friend bool operator==(const SeedReports&, const SeedReports&) = default;
};

/// Final-round statistics across seeds.
struct Summary {
  std::size_t seeds = 0;
  std::vector<double> pm_final;
  std::vector<double> gm_final;
  std::optional<double> pm_mean, pm_sem, gm_mean, gm_sem;
};

Summary summarize(std::span<const SeedReports> runs);

nlohmann::json to_json(const RoundReport& report);
RoundReport round_from_json(const nlohmann::json& j);

/// JSON lines: one header record, one record per (seed, round), and a
/// closing summary record.
void write_report(std::ostream& out, const nlohmann::json& header,
                  std::span<const SeedReports> runs);
void write_report(const std::filesystem::path& path, const nlohmann::json& header,
                  std::span<const SeedReports> runs);

struct ReportFile {
  nlohmann::json header;
  std::vector<SeedReports> runs;
  nlohmann::json summary;
};

ReportFile read_report(std::istream& in);
ReportFile read_report(const std::filesystem::path& path);

/// "client_id,n_j,pm_accuracy" rows of one round; empty accuracy cells for
/// clients without test data.
void write_client_csv(const std::filesystem::path& path, const RoundReport& report);

}  // namespace fvem
