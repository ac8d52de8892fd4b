#include "ordernet/rng.hpp"

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

using ordernet::SplitMix64;

// Reference outputs for seed 1234567, computed once from the published
// splitmix64 recurrence and frozen here. Any platform or refactor drift
// breaks dataset reproducibility, so these are exact.
TEST(SplitMix64, KnownStream) {
  SplitMix64 rng(1234567u);
  const std::uint64_t expected[4] = {6457827717110365317ull, 3203168211198807973ull,
                                     9817491932198370423ull, 4593380528125082431ull};
  for (std::uint64_t e : expected) EXPECT_EQ(rng.next_u64(), e);
}

TEST(SplitMix64, SeedZeroFirstDraw) {
  SplitMix64 rng(0u);
  EXPECT_EQ(rng.next_u64(), 16294208416658607535ull);
}

TEST(SplitMix64, DoublesInUnitInterval) {
  SplitMix64 rng(42u);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_double();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(SplitMix64, DoubleMeanNearHalf) {
  SplitMix64 rng(7u);
  double acc = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) acc += rng.next_double();
  EXPECT_NEAR(acc / n, 0.5, 0.005);
}

TEST(SplitMix64, NextBelowBounds) {
  SplitMix64 rng(99u);
  std::vector<int> hits(10, 0);
  for (int i = 0; i < 20000; ++i) {
    const auto v = rng.next_below(10);
    ASSERT_LT(v, 10u);
    ++hits[static_cast<std::size_t>(v)];
  }
  for (int h : hits) EXPECT_GT(h, 1500);  // roughly uniform
}

TEST(SplitMix64, GaussianMoments) {
  SplitMix64 rng(5u);
  const int n = 200000;
  double s = 0, ss = 0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.next_gaussian();
    s += g;
    ss += g * g;
  }
  const double mean = s / n;
  const double var = ss / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(SplitMix64, ShuffleIsPermutationAndDeterministic) {
  std::vector<int> a(50);
  std::iota(a.begin(), a.end(), 0);
  std::vector<int> b = a;
  SplitMix64 r1(2024u), r2(2024u);
  r1.shuffle(a);
  r2.shuffle(b);
  EXPECT_EQ(a, b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> ident(50);
  std::iota(ident.begin(), ident.end(), 0);
  EXPECT_EQ(sorted, ident);
  // and it actually moved something
  EXPECT_NE(a, ident);
}

TEST(SplitMix64, DeriveSeedSeparatesStreams) {
  const auto s1 = ordernet::derive_seed(1, 5, 0);
  const auto s2 = ordernet::derive_seed(1, 5, 1);
  const auto s3 = ordernet::derive_seed(2, 5, 0);
  EXPECT_NE(s1, s2);
  EXPECT_NE(s1, s3);
  EXPECT_EQ(s1, ordernet::derive_seed(1, 5, 0));
}
