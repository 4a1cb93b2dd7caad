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
#include <optional>
#include <vector>

namespace fvem {

struct ClientAccuracy {
  std::size_t client_id = 0;
  std::size_t n_j = 0;
  /// Empty when the client's filtered test set is empty; such clients are
  /// excluded from averages.
  std::optional<double> accuracy;

  friend bool operator==(const ClientAccuracy&, const ClientAccuracy&) = default;
};

/// Metrics of one communication round.
struct RoundReport {
  std::size_t round = 0;
  std::optional<double> gm_accuracy;
  std::vector<ClientAccuracy> pm_accuracies;
  /// tau_j / sum tau over all clients; empty for schemes without confidences.
  std::vector<double> confidence_ratios;
  /// ||mu_j - w||^2 / d per client.
  std::vector<double> model_deviations;
  std::size_t reporter_count = 0;
  bool no_reporters = false;

  /// Uniform mean over clients with a nonempty test set.
  [[nodiscard]] std::optional<double> mean_pm() const {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& c : pm_accuracies) {
      if (c.accuracy) {
        sum += *c.accuracy;
        ++count;
      }
    }
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
  }

  friend bool operator==(const RoundReport&, const RoundReport&) = default;
};

}  // namespace fvem
