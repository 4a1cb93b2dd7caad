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

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>

namespace fvem {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Tags that keep the streams of different subsystems apart.
enum class StreamTag : std::uint64_t {
  kInit = 1,
  kServer = 2,
  kClient = 3,
  kPartition = 4,
  kSynth = 5,
  kBaseline = 6,
  kEval = 7,
};

/// Counter-based random stream.
///
/// A stream is addressed by (seed, path). The path is hashed into the upper
/// half of the Philox counter and the lower half counts blocks, so any two
/// distinct paths give independent sequences and a stream can be recreated
/// anywhere without coordination. This is what makes the federated rounds
/// independent of worker scheduling.
class Stream {
 public:
  Stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path);
  Stream(std::uint64_t seed, std::span<const std::uint64_t> path);

  /// Child stream keyed by this stream's id and tag. Children never
  /// coincide with their parent or with one another.
  [[nodiscard]] Stream derive(std::uint64_t tag) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller.
  double normal();
  /// Uniform on {0, ..., n-1}; n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  bool bernoulli(double p);

  void fill_normal(std::span<double> out);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  [[nodiscard]] std::uint64_t stream_id() const { return stream_id_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace fvem
