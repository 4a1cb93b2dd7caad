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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fvem/baselines.hpp"
#include "fvem/data.hpp"
#include "fvem/federation.hpp"
#include "fvem/partition.hpp"

namespace fvem {

enum class DatasetKind { kSynth, kFmnist };
enum class RunScheme { kPfedvem, kLocal, kFedAvg, kFedProx };

struct IdxPaths {
  std::filesystem::path train_images, train_labels, test_images, test_labels;
};

/// Everything one experiment needs. Seeds drive the partition, the
/// initialization and every training stream; the synthetic data itself is
/// fixed by synth.seed.
struct ExperimentConfig {
  DatasetKind dataset = DatasetKind::kSynth;
  IdxPaths idx;
  SynthSpec synth;
  PartitionSpec partition;
  std::vector<std::size_t> hidden = {100};
  RunScheme scheme = RunScheme::kPfedvem;
  TrainConfig train;
  BaselineConfig baseline;
  std::size_t pm_mc_samples = 0;
  std::vector<std::uint64_t> seeds = {0};
  std::filesystem::path out = "report.jsonl";
  std::optional<std::filesystem::path> client_csv;
  std::optional<std::filesystem::path> checkpoint_dir;
};

/// Parses "section.key = value" lines. Blank lines and lines starting with
/// '#' are skipped. Relative paths resolve against `base_dir`. Throws
/// ConfigError listing every unknown key and unparseable value.
ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies one "key=value" assignment.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value,
                      const std::filesystem::path& base_dir = {});

/// Every key with its current value, in a fixed order.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg);

/// Empty iff every invariant holds; each entry names the violated field.
std::vector<std::string> validate(const ExperimentConfig& cfg);

std::string scheme_name(RunScheme scheme);

}  // namespace fvem
