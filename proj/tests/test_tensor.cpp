#include <gtest/gtest.h>

#include "synwarp/tensor.hpp"

using namespace synwarp;

TEST(Shape, BasicsAndStrides) {
  Shape s({2, 3, 4});
  EXPECT_EQ(s.rank(), 3);
  EXPECT_EQ(s.numel(), 24);
  EXPECT_EQ(s.stride(0), 12);
  EXPECT_EQ(s.stride(2), 1);
  EXPECT_EQ(s, Shape({2, 3, 4}));
  EXPECT_NE(s, Shape({2, 3}));
}

TEST(Shape, RejectsBadRankAndExtents) {
  EXPECT_THROW(Shape(std::vector<int>{}), std::invalid_argument);
  EXPECT_THROW(Shape({1, 1, 1, 1, 1, 1}), std::invalid_argument);
  EXPECT_THROW(Shape({2, 0}), std::invalid_argument);
  EXPECT_THROW(Shape({-1}), std::invalid_argument);
}

TEST(Tensor, IndexingRowMajor) {
  Tensor t({2, 3});
  for (long i = 0; i < 6; ++i) t[i] = static_cast<float>(i);
  EXPECT_EQ(t.at(0, 0), 0.0f);
  EXPECT_EQ(t.at(0, 2), 2.0f);
  EXPECT_EQ(t.at(1, 0), 3.0f);
  EXPECT_EQ(t.flat(1, 2), 5);
}

TEST(Tensor, ReshapePreservesDataRejectsMismatch) {
  Tensor t({2, 6});
  t[7] = 3.5f;
  Tensor r = t.reshaped(Shape({3, 4}));
  EXPECT_EQ(r.dim(0), 3);
  EXPECT_EQ(r[7], 3.5f);
  EXPECT_THROW(t.reshaped(Shape({5})), std::invalid_argument);
}

TEST(Tensor, FiniteAndBitComparisons) {
  Tensor a({3});
  Tensor b({3});
  EXPECT_TRUE(a.all_finite());
  EXPECT_TRUE(a.same_bits(b));
  b[1] = 1.0f;
  EXPECT_FALSE(a.same_bits(b));
  a[1] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_FALSE(a.all_finite());
  EXPECT_FALSE(Tensor({1, 3}).same_bits(Tensor({3})));
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DifferentSeedsDiffer) {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
  EXPECT_EQ(same, 0);
}

TEST(Rng, UniformRangeAndNextBelow) {
  Rng r(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform(-0.25, 0.5);
    EXPECT_GE(u, -0.25);
    EXPECT_LT(u, 0.5);
    EXPECT_LT(r.next_below(13), 13u);
  }
}

TEST(Rng, ForkStreamsAreIndependentAndStable) {
  Rng root(99);
  Rng f1 = root.fork(1), f2 = root.fork(2), f1b = root.fork(1);
  EXPECT_EQ(f1.next_u64(), f1b.next_u64());
  Rng g1 = root.fork(1);
  Rng g2 = root.fork(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += g1.next_u64() == g2.next_u64();
  EXPECT_EQ(same, 0);
}

TEST(Rng, NormalHasRoughlyUnitMoments) {
  Rng r(5);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.05);
  EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(InitParams, RespectsFanInBound) {
  Rng r(3);
  const Tensor w = init_params<float>(r, Shape({64, 6}), 6);
  const double bound = std::sqrt(6.0 / 6.0);
  for (long i = 0; i < w.numel(); ++i) {
    EXPECT_LE(std::fabs(w[i]), bound);
  }
  EXPECT_THROW(init_params<float>(r, Shape({2}), 0), std::invalid_argument);
}
