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

#include "fvem/partition.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <string>

#include "fvem/error.hpp"

namespace fvem {
namespace {

std::uint64_t scenario_code(Scenario s) { return static_cast<std::uint64_t>(s) + 1; }

Stream assignment_stream(std::uint64_t seed, Scenario s) {
  return Stream(seed, {static_cast<std::uint64_t>(StreamTag::kPartition), scenario_code(s), 0});
}

Stream group_stream(std::uint64_t seed, Scenario s, std::uint64_t group) {
  return Stream(seed,
                {static_cast<std::uint64_t>(StreamTag::kPartition), scenario_code(s), 1, group});
}

// Without-replacement draws from a pool that is refilled with one copy of
// every item whenever it runs dry. A client never draws an item it already
// holds; if only such items remain, the pool is refilled and the draw
// continues.
class RefillPool {
 public:
  explicit RefillPool(std::vector<int> items) : items_(std::move(items)) {}

  int draw(const std::vector<int>& held, Stream& rng) {
    for (int attempt = 0; attempt < 2; ++attempt) {
      if (pool_.empty()) pool_ = items_;
      std::vector<std::size_t> candidates;
      for (std::size_t i = 0; i < pool_.size(); ++i) {
        if (std::find(held.begin(), held.end(), pool_[i]) == held.end()) candidates.push_back(i);
      }
      if (!candidates.empty()) {
        const std::size_t pick = candidates[rng.uniform_index(candidates.size())];
        const int item = pool_[pick];
        pool_.erase(pool_.begin() + static_cast<std::ptrdiff_t>(pick));
        return item;
      }
      pool_.insert(pool_.end(), items_.begin(), items_.end());
    }
    throw InputError("partition: client already holds every item");
  }

 private:
  std::vector<int> items_;
  std::vector<int> pool_;
};

// Splits the members of each group among the clients holding it, in client
// order, by shuffle-then-slice.
Partition split_groups(const std::vector<int>& member_group, std::size_t num_groups,
                       std::vector<std::vector<int>> groups, GroupKind kind,
                       std::uint64_t seed, Scenario scenario) {
  const std::size_t clients = groups.size();
  std::vector<std::vector<std::size_t>> holders(num_groups);
  for (std::size_t j = 0; j < clients; ++j) {
    for (int g : groups[j]) holders[static_cast<std::size_t>(g)].push_back(j);
  }
  std::vector<std::vector<std::size_t>> members(num_groups);
  for (std::size_t i = 0; i < member_group.size(); ++i) {
    members[static_cast<std::size_t>(member_group[i])].push_back(i);
  }

  Partition p;
  p.kind = kind;
  p.clients.resize(clients);
  for (std::size_t g = 0; g < num_groups; ++g) {
    const auto& owners = holders[g];
    if (owners.empty()) continue;
    auto& pts = members[g];
    if (pts.size() < owners.size()) {
      throw InputError("partition: group " + std::to_string(g) + " has " +
                       std::to_string(pts.size()) + " points for " +
                       std::to_string(owners.size()) + " clients");
    }
    Stream rng = group_stream(seed, scenario, g);
    rng.shuffle(std::span<std::size_t>(pts));
    const auto sizes = slice_sizes(pts.size(), owners.size(), rng);
    std::size_t offset = 0;
    for (std::size_t m = 0; m < owners.size(); ++m) {
      auto& dst = p.clients[owners[m]];
      dst.insert(dst.end(), pts.begin() + static_cast<std::ptrdiff_t>(offset),
                 pts.begin() + static_cast<std::ptrdiff_t>(offset + sizes[m]));
      offset += sizes[m];
    }
  }
  for (auto& c : p.clients) std::sort(c.begin(), c.end());
  for (auto& g : groups) std::sort(g.begin(), g.end());
  p.groups = std::move(groups);
  return p;
}

std::vector<int> all_labels(const Dataset& ds) {
  std::vector<int> labels(ds.num_classes);
  std::iota(labels.begin(), labels.end(), 0);
  return labels;
}

void require_clients(const Dataset& ds, std::size_t clients) {
  if (clients == 0) throw InputError("partition: need at least one client");
  if (clients > ds.size()) {
    throw InputError("partition: " + std::to_string(clients) + " clients for " +
                     std::to_string(ds.size()) + " points");
  }
}

}  // namespace

std::vector<std::size_t> Partition::sizes() const {
  std::vector<std::size_t> out;
  out.reserve(clients.size());
  for (const auto& c : clients) out.push_back(c.size());
  return out;
}

std::vector<std::size_t> slice_sizes(std::size_t n, std::size_t parts, Stream& rng) {
  if (parts == 0) throw InputError("slice_sizes: M must be positive");
  if (parts > n) {
    throw InputError("slice_sizes: M = " + std::to_string(parts) + " exceeds N = " +
                     std::to_string(n));
  }
  // Floyd's algorithm: a uniform (M-1)-subset of {1, ..., N-1}.
  const std::size_t m = parts - 1;
  const std::size_t hi = n - 1;
  std::set<std::size_t> cuts;
  for (std::size_t j = hi - m + 1; j <= hi && m > 0; ++j) {
    const std::size_t t = 1 + static_cast<std::size_t>(rng.uniform_index(j));
    if (!cuts.insert(t).second) cuts.insert(j);
  }
  std::vector<std::size_t> sizes;
  sizes.reserve(parts);
  std::size_t prev = 0;
  for (std::size_t c : cuts) {
    sizes.push_back(c - prev);
    prev = c;
  }
  sizes.push_back(n - prev);
  return sizes;
}

Partition partition_label_skew(const Dataset& ds, std::size_t clients, std::size_t k,
                               std::uint64_t seed) {
  require_clients(ds, clients);
  if (k == 0 || k > ds.num_classes) {
    throw InputError("label_skew: k must be in [1, " + std::to_string(ds.num_classes) + "]");
  }
  if (clients * k < ds.num_classes) {
    throw InputError("label_skew: J * k < C leaves labels without a client");
  }
  Stream rng = assignment_stream(seed, Scenario::kLabelSkew);
  RefillPool pool(all_labels(ds));
  std::vector<std::vector<int>> groups(clients);
  for (auto& held : groups) {
    for (std::size_t r = 0; r < k; ++r) held.push_back(pool.draw(held, rng));
  }
  return split_groups(ds.labels, ds.num_classes, std::move(groups), GroupKind::kLabel, seed,
                      Scenario::kLabelSkew);
}

Partition partition_concept_drift(const Dataset& ds, std::size_t clients, std::uint64_t seed) {
  require_clients(ds, clients);
  if (!ds.has_subclasses()) throw InputError("concept_drift: dataset has no subclass labels");
  const std::vector<int> parent = ds.subclass_parents();
  std::vector<RefillPool> pools;
  for (std::size_t c = 0; c < ds.num_classes; ++c) {
    std::vector<int> subs;
    for (std::size_t s = 0; s < parent.size(); ++s) {
      if (parent[s] == static_cast<int>(c)) subs.push_back(static_cast<int>(s));
    }
    if (subs.empty()) {
      throw InputError("concept_drift: superclass " + std::to_string(c) + " has no subclasses");
    }
    pools.emplace_back(std::move(subs));
  }
  Stream rng = assignment_stream(seed, Scenario::kConceptDrift);
  std::vector<std::vector<int>> groups(clients);
  for (auto& held : groups) {
    for (auto& pool : pools) held.push_back(pool.draw(held, rng));
  }
  return split_groups(ds.subclasses, ds.num_subclasses, std::move(groups), GroupKind::kSubclass,
                      seed, Scenario::kConceptDrift);
}

Partition partition_quantity(const Dataset& ds, std::size_t clients, std::uint64_t seed) {
  require_clients(ds, clients);
  std::vector<int> one_group(ds.size(), 0);
  std::vector<std::vector<int>> groups(clients, std::vector<int>{0});
  Partition p = split_groups(one_group, 1, std::move(groups), GroupKind::kLabel, seed,
                             Scenario::kQuantityOnly);
  for (auto& g : p.groups) g = all_labels(ds);
  return p;
}

Partition partition_iid_equal(const Dataset& ds, std::size_t clients, std::uint64_t seed) {
  require_clients(ds, clients);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  Stream rng = group_stream(seed, Scenario::kIidEqual, 0);
  rng.shuffle(std::span<std::size_t>(order));
  Partition p;
  p.kind = GroupKind::kLabel;
  p.clients.resize(clients);
  p.groups.assign(clients, all_labels(ds));
  const std::size_t base = ds.size() / clients;
  const std::size_t extra = ds.size() % clients;
  std::size_t offset = 0;
  for (std::size_t j = 0; j < clients; ++j) {
    const std::size_t n = base + (j < extra ? 1 : 0);
    p.clients[j].assign(order.begin() + static_cast<std::ptrdiff_t>(offset),
                        order.begin() + static_cast<std::ptrdiff_t>(offset + n));
    std::sort(p.clients[j].begin(), p.clients[j].end());
    offset += n;
  }
  return p;
}

Partition make_partition(const Dataset& ds, const PartitionSpec& spec) {
  switch (spec.scenario) {
    case Scenario::kLabelSkew:
      return partition_label_skew(ds, spec.clients, spec.labels_per_client, spec.seed);
    case Scenario::kConceptDrift: return partition_concept_drift(ds, spec.clients, spec.seed);
    case Scenario::kQuantityOnly: return partition_quantity(ds, spec.clients, spec.seed);
    case Scenario::kIidEqual: return partition_iid_equal(ds, spec.clients, spec.seed);
  }
  throw InputError("make_partition: unknown scenario");
}

std::vector<std::size_t> client_test_indices(const Dataset& test, const Partition& partition,
                                             std::size_t client) {
  const auto& held = partition.groups.at(client);
  const bool by_subclass = partition.kind == GroupKind::kSubclass;
  if (by_subclass && !test.has_subclasses()) {
    throw InputError("client_test_indices: test set lacks subclass labels");
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const int g = by_subclass ? test.subclasses[i] : test.labels[i];
    if (std::binary_search(held.begin(), held.end(), g)) out.push_back(i);
  }
  return out;
}

std::string check_partition(const Partition& partition, std::size_t dataset_size,
                            bool require_cover) {
  std::vector<char> seen(dataset_size, 0);
  std::size_t total = 0;
  for (std::size_t j = 0; j < partition.clients.size(); ++j) {
    if (partition.clients[j].empty()) return "client " + std::to_string(j) + " is empty";
    for (std::size_t i : partition.clients[j]) {
      if (i >= dataset_size) return "index " + std::to_string(i) + " out of range";
      if (seen[i]) return "index " + std::to_string(i) + " assigned twice";
      seen[i] = 1;
      ++total;
    }
  }
  if (require_cover && total != dataset_size) {
    return std::to_string(dataset_size - total) + " points not assigned";
  }
  return {};
}

void write_partition_tsv(const Partition& partition, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t j = 0; j < partition.clients.size(); ++j) {
    for (std::size_t i : partition.clients[j]) out << j << '\t' << i << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace fvem
