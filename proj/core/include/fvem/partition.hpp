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
#include <span>
#include <vector>

#include "fvem/data.hpp"
#include "fvem/rng.hpp"

namespace fvem {

enum class Scenario {
  kLabelSkew,     ///< each client holds k of the C labels
  kConceptDrift,  ///< each client holds one subclass per superclass
  kQuantityOnly,  ///< random slicing of the whole set
  kIidEqual,      ///< shuffled, equal sizes
};

struct PartitionSpec {
  Scenario scenario = Scenario::kLabelSkew;
  std::size_t clients = 100;
  std::size_t labels_per_client = 5;  ///< k, label skew only
  std::uint64_t seed = 0;
};

/// What a client's groups refer to, which also decides test filtering.
enum class GroupKind { kLabel, kSubclass };

struct Partition {
  /// Indices into the parent dataset, ascending per client.
  std::vector<std::vector<std::size_t>> clients;
  /// Labels or subclasses held by each client, ascending.
  std::vector<std::vector<int>> groups;
  GroupKind kind = GroupKind::kLabel;

  [[nodiscard]] std::size_t num_clients() const { return clients.size(); }
  [[nodiscard]] std::vector<std::size_t> sizes() const;
};

/// Cuts N items into M contiguous parts at M-1 distinct cut points drawn
/// uniformly without replacement from {1, ..., N-1}.
std::vector<std::size_t> slice_sizes(std::size_t n, std::size_t parts, Stream& rng);

Partition partition_label_skew(const Dataset& ds, std::size_t clients, std::size_t k,
                               std::uint64_t seed);
Partition partition_concept_drift(const Dataset& ds, std::size_t clients, std::uint64_t seed);
Partition partition_quantity(const Dataset& ds, std::size_t clients, std::uint64_t seed);
Partition partition_iid_equal(const Dataset& ds, std::size_t clients, std::uint64_t seed);

Partition make_partition(const Dataset& ds, const PartitionSpec& spec);

/// Test points whose label (or subclass) the client holds.
std::vector<std::size_t> client_test_indices(const Dataset& test, const Partition& partition,
                                             std::size_t client);

/// Disjoint, nonempty per client, and (when `require_cover`) covering.
/// Returns an empty string when valid, otherwise the first violation.
std::string check_partition(const Partition& partition, std::size_t dataset_size,
                            bool require_cover = true);

/// "client_id<TAB>index" per line.
void write_partition_tsv(const Partition& partition, const std::filesystem::path& path);

}  // namespace fvem
