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
#include <optional>
#include <span>
#include <vector>

#include "fvem/tensor.hpp"

namespace fvem {

/// Labelled images flattened to rows of an (N, input_dim) matrix.
struct Dataset {
  DenseTensor images;
  std::vector<int> labels;
  /// Fine-grained labels for concept-drift splits; empty when absent.
  std::vector<int> subclasses;
  std::size_t num_classes = 0;
  std::size_t num_subclasses = 0;

  [[nodiscard]] std::size_t size() const { return labels.size(); }
  [[nodiscard]] std::size_t input_dim() const { return images.cols(); }
  [[nodiscard]] bool has_subclasses() const { return !subclasses.empty(); }

  /// Superclass of each subclass id, derived from the annotations.
  [[nodiscard]] std::vector<int> subclass_parents() const;

  /// Throws InputError when an invariant is broken.
  void validate() const;
};

/// Materialized subset, contiguous so batches map straight onto the kernels.
struct ClientData {
  DenseTensor x;
  std::vector<int> y;

  [[nodiscard]] std::size_t size() const { return y.size(); }
};

ClientData take(const Dataset& ds, std::span<const std::size_t> indices);

/// Reads a pair of big-endian IDX files (images 0x00000803, labels
/// 0x00000801). Pixels are scaled by 1/255. Throws FormatError with the
/// byte offset of the first problem.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

/// Gaussian mixture with a superclass/subclass hierarchy.
struct SynthSpec {
  std::size_t superclasses = 5;
  std::size_t subclasses_per_class = 3;
  std::size_t dim = 20;
  std::size_t points_per_subclass = 200;
  std::size_t test_points_per_subclass = 100;
  /// Distance unit between mode centers; see synth_clusters.
  double separation = 1.0;
  /// Anchor offset of each subclass slot, in separation units.
  double slot_spacing = 3.0;
  double noise = 0.3;
  std::uint64_t seed = 0;
};

enum class SynthSplit { kTrain, kTest };

/// Subclass m of superclass c is centered at
/// slot_spacing * separation * e[C + m] + separation * (e[a_m(c)] + e[a_m(c+1 mod C)]),
/// where a_m is a seeded permutation of the first C axes (with C <= 2 only
/// the first offset is used). In each slot, cyclically adjacent
/// superclasses are sqrt(2) * separation apart and the rest 2 * separation;
/// modes of different slots are at least sqrt(18) * separation apart for
/// the default spacing. A client holding one subclass per superclass
/// therefore sees few of the close pairs the pooled data has. Points are
/// center + noise * N(0, I) over all dim coordinates; the two splits draw
/// independent points around the same centers.
Dataset synth_clusters(const SynthSpec& spec, SynthSplit split = SynthSplit::kTrain);

}  // namespace fvem
