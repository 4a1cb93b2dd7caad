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
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "fvem/data.hpp"
#include "fvem/mlp.hpp"
#include "fvem/parallel.hpp"
#include "fvem/report.hpp"
#include "fvem/rng.hpp"

namespace fvem {

enum class Scheme { kLocal, kFedAvg, kFedProx };

struct BaselineConfig {
  Scheme scheme = Scheme::kFedAvg;
  double lr = 0.01;
  std::size_t epochs = 5;  ///< R; Local trains this many epochs in total
  std::size_t batch = 50;  ///< B
  double mu_prox = 0.0;    ///< fedprox only
  std::size_t rounds = 100;
  double report_prob = 0.1;
  std::uint64_t seed = 0;
};

/// Target of one FedProx mini-batch: cross entropy plus
/// (mu/2) * ||params - anchor||^2 over every parameter.
struct ProximalObjective {
  double value = 0.0;
  MlpParams grad;
};

ProximalObjective proximal_objective(const MlpParams& params, const MlpParams& anchor,
                                     double mu_prox, const DenseTensor& batch,
                                     std::span<const int> labels);

/// Mini-batch SGD over `data`, reshuffled every epoch. With mu_prox > 0 the
/// penalty toward `anchor` is applied as an implicit step, which stays
/// stable for any lr * mu_prox.
MlpParams sgd_train(MlpParams params, const ClientData& data, double lr, std::size_t epochs,
                    std::size_t batch, Stream& rng, const MlpParams* anchor = nullptr,
                    double mu_prox = 0.0);

MlpParams local_train(const ClientData& data, const BaselineConfig& cfg, const MlpParams& init,
                      Stream& rng);

Stream baseline_stream(std::uint64_t seed, std::size_t client, std::size_t round);

struct FederatedRound {
  MlpParams next;
  std::size_t reporter_count = 0;
};

/// Reporters run R epochs from the broadcast model; the server averages
/// them weighted by data size. Everyone else's update would be overwritten
/// by the next broadcast, so only reporters are trained.
FederatedRound fedavg_round(const MlpParams& global,
                            std::span<const std::shared_ptr<const ClientData>> data,
                            const BaselineConfig& cfg, std::size_t round, const WorkerPool& pool);

using BaselineObserver = std::function<void(const MlpParams&, RoundReport&)>;

struct BaselineResult {
  MlpParams global;
  std::vector<MlpParams> locals;  ///< Local only
  std::vector<RoundReport> reports;
};

/// Local: every client trains alone from the shared initialization.
/// FedAvg / FedProx: `rounds` rounds of fedavg_round, observer after each.
BaselineResult run_baseline(const BaselineConfig& cfg,
                            std::span<const std::shared_ptr<const ClientData>> data,
                            const MlpSpec& spec, const WorkerPool& pool,
                            const BaselineObserver& observer = {});

}  // namespace fvem
