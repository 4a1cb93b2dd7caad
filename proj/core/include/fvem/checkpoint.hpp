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
#include <string>
#include <vector>

#include "fvem/federation.hpp"

namespace fvem {

// Layout, all integers and floats little-endian:
//   "FVEM"  u32 version  u64 d  u64 J  u64 t  u64 base_len
//   f64 w[d]  f64 theta[base_len]
//   J times: f64 mu[d]  f64 pi[d]  f64 tau
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::size_t round = 0;
  std::vector<double> w;
  std::vector<double> theta;
  std::vector<VariationalPosterior> posteriors;
  std::vector<double> taus;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

Checkpoint make_checkpoint(const GlobalState& global, const std::vector<ClientState>& clients);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::filesystem::path& path, const GlobalState& global,
                      const std::vector<ClientState>& clients);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// "round_0007.fvem"
std::string checkpoint_name(std::size_t round);

}  // namespace fvem
