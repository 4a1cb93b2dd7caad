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

#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <vector>

#include "fvem/config.hpp"
#include "fvem/data.hpp"
#include "fvem/metrics.hpp"
#include "fvem/mlp.hpp"
#include "fvem/parallel.hpp"

namespace fvem {

struct ExperimentData {
  Dataset train;
  Dataset test;
};

ExperimentData load_data(const ExperimentConfig& cfg);
MlpSpec model_spec(const ExperimentConfig& cfg, const Dataset& train);

/// Partition, train and evaluate one seed of the configured scheme.
SeedReports run_seed(const ExperimentConfig& cfg, const ExperimentData& data, std::uint64_t seed,
                     const WorkerPool& pool);

using SeedCallback = std::function<void(const SeedReports&)>;

std::vector<SeedReports> run_experiment(const ExperimentConfig& cfg, const ExperimentData& data,
                                        const WorkerPool& pool, const SeedCallback& on_seed = {});

nlohmann::json report_header(const ExperimentConfig& cfg);

/// Report file plus, when configured, one client CSV per seed for its
/// final round.
void write_outputs(const ExperimentConfig& cfg, const std::vector<SeedReports>& runs);

}  // namespace fvem
