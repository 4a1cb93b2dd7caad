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

#include "fvem/rng.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

namespace fvem {
namespace {

using Block = std::array<std::uint32_t, 4>;

// Known-answer vectors published with the Random123 distribution.
TEST(Philox, KnownAnswers) {
  EXPECT_EQ(philox4x32({0, 0, 0, 0}, {0, 0}),
            (Block{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (Block{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (Block{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Stream, SameAddressSameSequence) {
  Stream a(42, {3, 7, 1});
  Stream b(42, {3, 7, 1});
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Stream, DistinctAddressesDiffer) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t c = 0; c < 50; ++c) {
    for (std::uint64_t r = 0; r < 20; ++r) firsts.insert(Stream(1, {3, c, r}).next_u64());
  }
  firsts.insert(Stream(2, {3, 0, 0}).next_u64());
  EXPECT_EQ(firsts.size(), 1001u);
}

TEST(Stream, DeriveIsDeterministicAndDistinct) {
  const Stream parent(5, {1, 2});
  Stream a = parent.derive(9);
  Stream b = Stream(5, {1, 2}).derive(9);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  std::set<std::uint64_t> firsts;
  Stream p = parent;
  firsts.insert(p.next_u64());
  for (std::uint64_t t = 0; t < 100; ++t) firsts.insert(parent.derive(t).next_u64());
  firsts.insert(Stream(5, {1, 3}).derive(9).next_u64());
  EXPECT_EQ(firsts.size(), 102u);
}

TEST(Stream, UniformMoments) {
  Stream s(7, {1});
  const int n = 200000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(sq / n - mean * mean, 1.0 / 12.0, 2e-3);
}

TEST(Stream, NormalMoments) {
  Stream s(8, {1});
  const int n = 200000;
  double m1 = 0.0;
  double m2 = 0.0;
  double m4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    m1 += z;
    m2 += z * z;
    m4 += z * z * z * z;
  }
  EXPECT_NEAR(m1 / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(m2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(m4 / n, 3.0, 0.1);
}

TEST(Stream, UniformIndexIsUnbiased) {
  Stream s(9, {1});
  std::array<int, 7> counts{};
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[s.uniform_index(7)];
  // Chi-square with 6 degrees of freedom; 22.46 is the 0.999 quantile.
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
  EXPECT_LT(chi2, 22.46);
}

TEST(Stream, ShuffleIsPermutation) {
  Stream s(10, {1});
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  s.shuffle(std::span<int>(v));
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_NE(v, sorted);
}

TEST(Stream, BernoulliEdges) {
  Stream s(11, {1});
  for (int i = 0; i < 1000; ++i) {
    EXPECT_FALSE(s.bernoulli(0.0));
    EXPECT_TRUE(s.bernoulli(1.0));
  }
}

}  // namespace
}  // namespace fvem
