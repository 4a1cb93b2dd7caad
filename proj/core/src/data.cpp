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

#include "fvem/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>
#include <span>
#include <set>
#include <string>

#include "fvem/error.hpp"
#include "fvem/rng.hpp"

namespace fvem {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > bytes.size()) {
    throw FormatError(path.string() + ": truncated header at byte offset " +
                      std::to_string(bytes.size()) + " (need " + std::to_string(offset + 4) +
                      " bytes)");
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void expect_magic(std::uint32_t got, std::uint32_t want, const std::filesystem::path& path) {
  if (got != want) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "bad magic 0x%08X at byte offset 0 (expected 0x%08X)", got,
                  want);
    throw FormatError(path.string() + ": " + buf);
  }
}

void expect_payload(const std::vector<unsigned char>& bytes, std::size_t header,
                    std::size_t payload, const std::filesystem::path& path) {
  if (bytes.size() < header + payload) {
    throw FormatError(path.string() + ": truncated at byte offset " +
                      std::to_string(bytes.size()) + " (expected " +
                      std::to_string(header + payload) + " bytes)");
  }
  if (bytes.size() > header + payload) {
    throw FormatError(path.string() + ": trailing data at byte offset " +
                      std::to_string(header + payload));
  }
}

}  // namespace

std::vector<int> Dataset::subclass_parents() const {
  std::vector<int> parent(num_subclasses, -1);
  for (std::size_t i = 0; i < subclasses.size(); ++i) {
    parent[static_cast<std::size_t>(subclasses[i])] = labels[i];
  }
  return parent;
}

void Dataset::validate() const {
  if (labels.empty()) throw InputError("dataset: no samples");
  if (images.rank() != 2 || images.rows() != labels.size()) {
    throw InputError("dataset: images " + images.shape_string() + " do not match " +
                     std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw InputError("dataset: label " + std::to_string(y) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    }
  }
  if (!subclasses.empty()) {
    if (subclasses.size() != labels.size()) throw InputError("dataset: subclass count mismatch");
    std::vector<int> parent(num_subclasses, -1);
    for (std::size_t i = 0; i < subclasses.size(); ++i) {
      const int s = subclasses[i];
      if (s < 0 || static_cast<std::size_t>(s) >= num_subclasses) {
        throw InputError("dataset: subclass " + std::to_string(s) + " out of range");
      }
      int& p = parent[static_cast<std::size_t>(s)];
      if (p != -1 && p != labels[i]) {
        throw InputError("dataset: subclass " + std::to_string(s) +
                         " appears under two superclasses");
      }
      p = labels[i];
    }
  }
  if (!images.all_finite()) throw InputError("dataset: non-finite pixel values");
}

ClientData take(const Dataset& ds, std::span<const std::size_t> indices) {
  ClientData out;
  out.x = gather_rows(ds.images, indices);
  out.y.reserve(indices.size());
  for (std::size_t i : indices) out.y.push_back(ds.labels[i]);
  return out;
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const auto img = read_file(images_path);
  expect_magic(read_be32(img, 0, images_path), kImageMagic, images_path);
  const std::size_t count = read_be32(img, 4, images_path);
  const std::size_t rows = read_be32(img, 8, images_path);
  const std::size_t cols = read_be32(img, 12, images_path);
  const std::size_t pixels = rows * cols;
  expect_payload(img, 16, count * pixels, images_path);

  const auto lab = read_file(labels_path);
  expect_magic(read_be32(lab, 0, labels_path), kLabelMagic, labels_path);
  const std::size_t label_count = read_be32(lab, 4, labels_path);
  expect_payload(lab, 8, label_count, labels_path);
  if (label_count != count) {
    throw FormatError(labels_path.string() + ": " + std::to_string(label_count) +
                      " labels at byte offset 4, but " + std::to_string(count) + " images");
  }
  if (count == 0) throw FormatError(images_path.string() + ": zero images at byte offset 4");

  Dataset ds;
  ds.images = DenseTensor::matrix(count, pixels);
  auto values = ds.images.values();
  for (std::size_t i = 0; i < count * pixels; ++i) values[i] = img[16 + i] / 255.0;
  ds.labels.resize(count);
  int max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    ds.labels[i] = lab[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = static_cast<std::size_t>(max_label) + 1;
  return ds;
}

Dataset synth_clusters(const SynthSpec& spec, SynthSplit split) {
  if (spec.superclasses == 0 || spec.subclasses_per_class == 0 || spec.dim == 0) {
    throw InputError("synth_clusters: superclasses, subclasses_per_class and dim must be positive");
  }
  const std::size_t per_mode =
      split == SynthSplit::kTrain ? spec.points_per_subclass : spec.test_points_per_subclass;
  if (per_mode == 0) throw InputError("synth_clusters: points per subclass must be positive");
  if (!(spec.noise >= 0.0) || !(spec.separation > 0.0)) {
    throw InputError("synth_clusters: noise must be >= 0 and separation > 0");
  }
  const std::size_t modes = spec.superclasses * spec.subclasses_per_class;
  if (spec.dim < spec.superclasses + spec.subclasses_per_class) {
    throw InputError("synth_clusters: dim must be at least superclasses + subclasses_per_class");
  }
  if (!(spec.slot_spacing > 0.0)) throw InputError("synth_clusters: slot_spacing must be > 0");

  // Subclass m of every superclass sits around the same anchor. Superclass c
  // is offset along axes a(c) and a(c + 1), so cyclic neighbours share one
  // axis.
  Stream center_rng(spec.seed, {static_cast<std::uint64_t>(StreamTag::kSynth), 0});
  std::vector<std::vector<double>> centers(modes, std::vector<double>(spec.dim, 0.0));
  for (std::size_t m = 0; m < spec.subclasses_per_class; ++m) {
    std::vector<std::size_t> axis(spec.superclasses);
    std::iota(axis.begin(), axis.end(), std::size_t{0});
    center_rng.shuffle(std::span<std::size_t>(axis));
    for (std::size_t c = 0; c < spec.superclasses; ++c) {
      auto& center = centers[c * spec.subclasses_per_class + m];
      center[spec.superclasses + m] = spec.slot_spacing * spec.separation;
      center[axis[c]] = spec.separation;
      if (spec.superclasses > 2) center[axis[(c + 1) % spec.superclasses]] = spec.separation;
    }
  }

  Stream point_rng(spec.seed, {static_cast<std::uint64_t>(StreamTag::kSynth),
                               split == SynthSplit::kTrain ? 1u : 2u});
  Dataset ds;
  ds.num_classes = spec.superclasses;
  ds.num_subclasses = modes;
  ds.images = DenseTensor::matrix(modes * per_mode, spec.dim);
  ds.labels.reserve(modes * per_mode);
  ds.subclasses.reserve(modes * per_mode);
  std::size_t row = 0;
  for (std::size_t c = 0; c < spec.superclasses; ++c) {
    for (std::size_t m = 0; m < spec.subclasses_per_class; ++m) {
      const std::size_t mode = c * spec.subclasses_per_class + m;
      for (std::size_t p = 0; p < per_mode; ++p, ++row) {
        for (std::size_t i = 0; i < spec.dim; ++i) {
          const double eps = spec.noise > 0.0 ? point_rng.normal() : 0.0;
          ds.images(row, i) = centers[mode][i] + spec.noise * eps;
        }
        ds.labels.push_back(static_cast<int>(c));
        ds.subclasses.push_back(static_cast<int>(mode));
      }
    }
  }
  return ds;
}

}  // namespace fvem
