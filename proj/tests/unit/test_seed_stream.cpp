// Copyright 2026 The qexp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qexp/seed_stream.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <vector>

namespace qexp {
namespace {

TEST(SeedStream, SamePathSameSequence) {
  const SeedStream a(42, {1, 8, 3});
  const SeedStream b = SeedStream(42).child({1, 8}).child(3);
  EXPECT_EQ(a, b);
  auto ga = a.engine();
  auto gb = b.engine();
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(ga(), gb());
}

TEST(SeedStream, ChildDoesNotMutateParent) {
  const SeedStream parent(7, {2});
  const SeedStream c = parent.child(5);
  EXPECT_EQ(parent.path(), (std::vector<std::uint64_t>{2}));
  EXPECT_EQ(c.path(), (std::vector<std::uint64_t>{2, 5}));
  EXPECT_EQ(c.to_string(), "7/2/5");
}

TEST(SeedStream, DistinctPathsDistinctKeys) {
  std::set<std::uint64_t> keys;
  const SeedStream root(42);
  for (std::uint64_t i = 0; i < 64; ++i) {
    for (std::uint64_t j = 0; j < 64; ++j) keys.insert(root.child({i, j}).key());
  }
  EXPECT_EQ(keys.size(), 64u * 64u);
  // Prefix paths and extended paths differ too.
  EXPECT_NE(root.child(0).key(), root.child({0, 0}).key());
  EXPECT_NE(SeedStream(1).key(), SeedStream(2).key());
}

// Neighbouring paths should look independent: the sample correlation of
// paired normal draws is within a few standard errors of zero.
TEST(SeedStream, NeighbouringPathsUncorrelated) {
  constexpr int kDraws = 20000;
  const SeedStream root(42);
  for (std::uint64_t t = 0; t < 5; ++t) {
    auto ga = root.child({3, t}).engine();
    auto gb = root.child({3, t + 1}).engine();
    std::normal_distribution<double> nd;
    double sxy = 0.0;
    for (int i = 0; i < kDraws; ++i) sxy += nd(ga) * nd(gb);
    const double corr = sxy / kDraws;
    EXPECT_LT(std::abs(corr), 4.0 / std::sqrt(double(kDraws))) << "t=" << t;
  }
}

}  // namespace
}  // namespace qexp
