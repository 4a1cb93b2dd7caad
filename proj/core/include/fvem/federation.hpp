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
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "fvem/data.hpp"
#include "fvem/mlp.hpp"
#include "fvem/parallel.hpp"
#include "fvem/report.hpp"
#include "fvem/rng.hpp"
#include "fvem/variational.hpp"

namespace fvem {

/// Hyperparameters of the variational federated scheme.
struct TrainConfig {
  std::size_t rounds = 100;      ///< T
  std::size_t local_epochs = 5;  ///< R, full-batch steps on (mu, pi)
  std::size_t mc_samples = 5;    ///< K
  double eta = 1e-3;             ///< head learning rate
  double base_lr = 0.01;
  std::size_t base_epochs = 5;
  std::size_t base_batch = 50;
  double report_prob = 0.1;  ///< s
  double rho0_sq = 0.1;      ///< initial prior variance; tau at round 0 is 1 / rho0_sq
  /// Initial posterior scale; defaults to sqrt(rho0_sq).
  std::optional<double> init_sigma;
  ConfidenceMode confidence_mode = ConfidenceMode::kFull;
  TauBounds tau_bounds;
  /// Only the drawn reporters train (off: every client trains every round).
  bool train_reporters_only = false;
  /// Whether clients that do not report still train their base copy. The
  /// copy is discarded unless uploaded, so turning this off changes no
  /// reported quantity, only the leftover theta_local of stragglers.
  bool straggler_base_training = true;
  std::uint64_t seed = 0;
};

struct GlobalState {
  std::vector<double> w;  ///< latent head
  BaseLayers theta;       ///< shared base
  std::size_t round = 0;

  friend bool operator==(const GlobalState&, const GlobalState&) = default;
};

struct ClientState {
  std::size_t id = 0;
  std::shared_ptr<const ClientData> data;
  VariationalPosterior posterior;
  double tau = 1.0;
  BaseLayers theta_local;

  [[nodiscard]] std::size_t n() const { return data ? data->size() : 0; }
};

/// What a reporter sends: its head mean, its confidence and its base.
struct ClientUpload {
  std::vector<double> mu;
  double tau = 0.0;
  std::vector<double> theta;
};

/// Little-endian float64 concatenation of mu | tau | theta, no framing.
std::vector<std::uint8_t> encode_upload(const ClientUpload& upload);
ClientUpload decode_upload(std::span<const std::uint8_t> bytes, std::size_t head_dim,
                           std::size_t base_dim);
constexpr std::size_t upload_size(std::size_t head_dim, std::size_t base_dim) {
  return 8 * (head_dim + 1 + base_dim);
}

Stream server_stream(std::uint64_t seed, std::size_t round);
Stream client_stream(std::uint64_t seed, std::size_t client, std::size_t round);

/// Each client independently with probability s, ascending ids.
std::vector<std::size_t> select_reporters(std::size_t clients, double s, Stream& rng);

/// Confidence-weighted mean of the reporters' head means.
std::vector<double> aggregate_heads(std::span<const std::vector<double>> mus,
                                    std::span<const double> taus);
/// Data-size-weighted mean of the reporters' bases.
BaseLayers aggregate_base(std::span<const BaseLayers> thetas, std::span<const std::size_t> sizes);

/// Local step of one client: recompute tau against the received w (1/rho0_sq
/// at round 0), R full-batch steps on the Monte-Carlo head objective, then
/// base_epochs of mini-batch SGD on the base with one posterior sample per
/// batch. Throws NumericError with the round and client id on divergence.
ClientState client_update(const ClientState& client, const GlobalState& global,
                          const TrainConfig& cfg, Stream& rng, bool train_base = true);

GlobalState initial_global(const MlpSpec& spec, const TrainConfig& cfg);
std::vector<ClientState> initial_clients(const GlobalState& global,
                                         std::span<const std::shared_ptr<const ClientData>> data,
                                         const TrainConfig& cfg);

struct RoundOutput {
  GlobalState next;
  RoundReport report;
};

/// One communication round. Updates `clients` in place; accuracies in the
/// report are left for the caller.
RoundOutput run_round(const GlobalState& global, std::vector<ClientState>& clients,
                      const MlpSpec& spec, const TrainConfig& cfg, const WorkerPool& pool);

using RoundObserver =
    std::function<void(const GlobalState&, const std::vector<ClientState>&, RoundReport&)>;

struct TrainingResult {
  GlobalState global;
  std::vector<ClientState> clients;
  std::vector<RoundReport> reports;
};

struct TrainingOptions {
  /// Called after every round, e.g. to fill in accuracies.
  RoundObserver observer;
  /// When set, a checkpoint is written after every round.
  std::optional<std::filesystem::path> checkpoint_dir;
};

TrainingResult run_training(const TrainConfig& cfg,
                            std::span<const std::shared_ptr<const ClientData>> data,
                            const MlpSpec& spec, const WorkerPool& pool,
                            const TrainingOptions& options = {});

}  // namespace fvem
