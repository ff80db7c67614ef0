// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "egsf/errors.hpp"
#include "egsf/metrics.hpp"
#include "egsf/rng.hpp"
#include "oracles.hpp"

namespace egsf {
namespace {

TEST(Accuracy, CountsMatches) {
  std::vector<std::size_t> p{1, 0, 1, 1}, y{1, 0, 0, 1};
  EXPECT_EQ(accuracy(p, y), 0.75);
  EXPECT_THROW(accuracy(std::vector<std::size_t>{1}, y), DimensionError);
}

TEST(RocAuc, PerfectAndInvertedScores) {
  std::vector<double> s{0.9, 0.8, 0.1, 0.2};
  std::vector<std::size_t> y{1, 1, 0, 0};
  EXPECT_EQ(roc_auc(s, y).value(), 1.0);
  std::vector<double> inv{0.1, 0.2, 0.9, 0.8};
  EXPECT_EQ(roc_auc(inv, y).value(), 0.0);
}

TEST(RocAuc, SingleClassIsAbsent) {
  std::vector<double> s{0.1, 0.4};
  std::vector<std::size_t> y{1, 1};
  EXPECT_FALSE(roc_auc(s, y).has_value());
}

TEST(RocAuc, MatchesPairwiseOracleExactly) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> s(n);
    std::vector<std::size_t> y(n);
    // Coarse scores force plenty of ties.
    const double levels = static_cast<double>(1 + rng.below(20));
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::floor(rng.uniform() * levels) / levels;
      y[i] = rng.below(2);
    }
    y[0] = 0;
    y[1] = 1;
    ASSERT_EQ(roc_auc(s, y).value(), oracle::auc_pairwise(s, y)) << "n=" << n;
  }
}

TEST(RocAuc, InversionComplementsAndBounds) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(60), neg(60);
    std::vector<std::size_t> y(60);
    for (std::size_t i = 0; i < 60; ++i) {
      s[i] = rng.uniform();
      neg[i] = -s[i];
      y[i] = i % 2;
    }
    const double a = roc_auc(s, y).value();
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
    EXPECT_NEAR(roc_auc(neg, y).value(), 1.0 - a, 1e-15);
  }
}

TEST(RocAuc, ShuffledScoresNearHalf) {
  Rng rng(3);
  const std::size_t n = 20000;
  std::vector<double> s(n);
  std::vector<std::size_t> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = i % 2;
  std::vector<std::size_t> perm = y;
  rng.shuffle(perm);
  for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<double>(perm[i]) + 0.01 * rng.uniform();
  EXPECT_NEAR(roc_auc(s, y).value(), 0.5, 0.05);
}

TEST(F1, PerfectHandAndDegenerate) {
  std::vector<std::size_t> y{1, 0, 1, 0};
  EXPECT_EQ(f1_score(y, y), 1.0);
  std::vector<std::size_t> p{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(f1_score(p, y), 0.5);  // tp 1, fp 1, fn 1
  std::vector<std::size_t> none{0, 0, 0, 0};
  EXPECT_EQ(f1_score(none, y), 0.0);
}

TEST(Ssim, IdentityIsExactlyOne) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_uniform({16, 16}, rng, 0.0, 1.0);
    EXPECT_EQ(ssim(x, x), 1.0);
  }
  Tensor flat({16, 16}, 0.3);
  EXPECT_EQ(ssim(flat, flat), 1.0);
}

TEST(Ssim, CheckerboardInversionIsNegative) {
  Tensor x({16, 16});
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 16; ++j) x.at({i, j}) = static_cast<double>((i + j) % 2);
  Tensor inv({16, 16});
  for (std::size_t i = 0; i < x.numel(); ++i) inv[i] = 1.0 - x[i];
  EXPECT_LT(ssim(x, inv), 0.0);
}

TEST(Ssim, SymmetricAndBounded) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor a = random_uniform({12, 12}, rng, 0.0, 1.0), b = random_uniform({12, 12}, rng, 0.0, 1.0);
    const double s = ssim(a, b);
    EXPECT_NEAR(s, ssim(b, a), 1e-12);
    EXPECT_LE(std::abs(s), 1.0);
  }
}

TEST(Ssim, WindowAndShapeErrors) {
  EXPECT_THROW(ssim(Tensor({8, 8}), Tensor({8, 9})), DimensionError);
  EXPECT_THROW(ssim(Tensor({8, 8}), Tensor({8, 8})), DimensionError);
  SsimOptions o;
  o.window = fitting_ssim_window(8, 8);
  EXPECT_EQ(o.window, 7u);
  EXPECT_EQ(ssim(Tensor({8, 8}, 0.5), Tensor({8, 8}, 0.5), o), 1.0);
  EXPECT_EQ(fitting_ssim_window(32, 32), 11u);
}

TEST(AttentionGrid, ColumnSumsRenormalized) {
  Tensor a({4, 4});
  for (std::size_t i = 0; i < 4; ++i) a.at({i, 2}) = 1.0;
  Tensor g = attention_grid(a, 2);
  EXPECT_EQ(g.shape(), (Shape{2, 2}));
  EXPECT_EQ(g.at({1, 0}), 1.0);
  EXPECT_EQ(g.at({0, 0}) + g.at({0, 1}) + g.at({1, 1}), 0.0);
  Tensor p = peak_normalized(Tensor({2}, std::vector<double>{0.5, 0.25}));
  EXPECT_EQ(p.values(), (std::vector<double>{1.0, 0.5}));
}

}  // namespace
}  // namespace egsf
