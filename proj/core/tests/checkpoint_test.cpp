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

#include "fvem/checkpoint.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "fvem/error.hpp"

namespace fvem {
namespace {

Checkpoint sample_checkpoint() {
  Checkpoint c;
  c.round = 7;
  c.w = {0.5, -1.25, 3.0};
  c.theta = {1.0, 2.0, -0.0, 1e-300};
  c.posteriors = {VariationalPosterior{{1.0, 2.0, 3.0}, {-1.0, 0.0, 1.0}},
                  VariationalPosterior{{-4.0, 0.25, 9.0}, {2.0, -3.0, 0.5}}};
  c.taus = {10.0, 0.125};
  return c;
}

std::uint64_t read_u64(const std::vector<std::uint8_t>& b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[at + static_cast<std::size_t>(i)];
  return v;
}

TEST(Checkpoint, Name) {
  EXPECT_EQ(checkpoint_name(7), "round_0007.fvem");
  EXPECT_EQ(checkpoint_name(12345), "round_12345.fvem");
}

TEST(Checkpoint, HeaderAndSize) {
  const Checkpoint c = sample_checkpoint();
  const auto bytes = encode_checkpoint(c);
  ASSERT_EQ(bytes.size(), 4u + 4u + 4u * 8u + 8u * (3 + 4) + 2u * 8u * (3 + 3 + 1));
  EXPECT_EQ(std::memcmp(bytes.data(), "FVEM", 4), 0);
  EXPECT_EQ(bytes[4], kCheckpointVersion);
  EXPECT_EQ(read_u64(bytes, 8), 3u);
  EXPECT_EQ(read_u64(bytes, 16), 2u);
  EXPECT_EQ(read_u64(bytes, 24), 7u);
  EXPECT_EQ(read_u64(bytes, 32), 4u);
}

TEST(Checkpoint, RoundTrip) {
  const Checkpoint c = sample_checkpoint();
  EXPECT_EQ(decode_checkpoint(encode_checkpoint(c)), c);
}

TEST(Checkpoint, CorruptInputsRejected) {
  auto bytes = encode_checkpoint(sample_checkpoint());
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  bad = bytes;
  bad[4] = 99;
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  bad = bytes;
  bad.pop_back();
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  bad = bytes;
  bad.push_back(0);
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  EXPECT_THROW(decode_checkpoint(std::vector<std::uint8_t>(10, 0)), FormatError);
}

TEST(Checkpoint, FromStateAndFile) {
  GlobalState g{{1.0, 2.0}, {Layer::zeros(1, 2)}, 3};
  g.theta[0].weight(0, 1) = 5.0;
  ClientState a;
  a.id = 0;
  a.posterior = VariationalPosterior{{0.5, 0.5}, {0.0, 1.0}};
  a.tau = 2.0;
  ClientState b = a;
  b.id = 1;
  b.tau = 4.0;
  const std::vector<ClientState> clients = {a, b};
  const Checkpoint c = make_checkpoint(g, clients);
  EXPECT_EQ(c.round, 3u);
  EXPECT_EQ(c.w, g.w);
  EXPECT_EQ(c.theta, (std::vector<double>{0.0, 5.0, 0.0}));
  EXPECT_EQ(c.taus, (std::vector<double>{2.0, 4.0}));

  const auto path = std::filesystem::temp_directory_path() / "fvem_checkpoint_test.fvem";
  write_checkpoint(path, g, clients);
  EXPECT_EQ(read_checkpoint(path), c);
  std::filesystem::remove(path);
  EXPECT_THROW(read_checkpoint(path), FormatError);
}

}  // namespace
}  // namespace fvem
