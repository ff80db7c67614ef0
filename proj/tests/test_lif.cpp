// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "egsf/errors.hpp"
#include "egsf/lif.hpp"
#include "egsf/rng.hpp"
#include "oracles.hpp"

namespace egsf {
namespace {

LifParams params(double v_th, double v_reset, double leak, double width = 1.0) {
  LifParams p;
  p.v_threshold = v_th;
  p.v_reset = v_reset;
  p.leak = leak;
  p.surrogate_width = width;
  return p;
}

std::pair<double, double> step1(double v, double x, const LifParams& p) {
  auto [s, next] = lif_step(LifState{Tensor({1}, v)}, Tensor({1}, x), p);
  return {s[0], next.membrane[0]};
}

TEST(LifStep, QuiescentNeuronStaysAtRest) {
  auto [s, v] = step1(0.0, 0.0, params(1.0, 0.0, 0.3));
  EXPECT_EQ(s, 0.0);
  EXPECT_EQ(v, 0.0);
}

TEST(LifStep, CrossingThresholdFiresAndResets) {
  auto [s, v] = step1(0.5, 1.0, params(1.0, 0.0, 0.5));
  EXPECT_EQ(s, 1.0);
  EXPECT_EQ(v, 0.0);
}

TEST(LifStep, SubthresholdLeaks) {
  auto [s, v] = step1(0.5, 0.2, params(1.0, 0.0, 0.5));
  EXPECT_EQ(s, 0.0);
  EXPECT_DOUBLE_EQ(v, 0.35);
}

TEST(LifStep, ExactlyAtThresholdFires) {
  EXPECT_EQ(step1(0.25, 0.75, params(1.0, 0.0, 0.5)).first, 1.0);
}

TEST(LifStep, ShapeMismatchThrows) {
  EXPECT_THROW(lif_step(LifState{Tensor({2})}, Tensor({3}), LifParams{}), DimensionError);
}

TEST(LifParams, InvalidValuesRejected) {
  EXPECT_THROW(params(1.0, 0.0, 1.5).validate(), ContractError);
  EXPECT_THROW(params(1.0, 0.0, 0.5, 0.0).validate(), ContractError);
  EXPECT_NO_THROW(LifParams{}.validate());
}

TEST(LifSequence, ConstantInputHandIterated) {
  Tensor in({5, 1}, 0.4);
  Tensor s = lif_sequence(in, params(1.0, 0.0, 0.0));
  EXPECT_EQ(s.values(), (std::vector<double>{0, 0, 1, 0, 0}));
}

TEST(LifSequence, ZeroInputIsSilent) {
  Tensor s = lif_sequence(Tensor({4, 3, 2}), LifParams{});
  for (double v : s.data()) EXPECT_EQ(v, 0.0);
}

TEST(LifSequence, SingleStepEqualsLifStep) {
  Rng rng(3);
  Tensor x = random_normal({1, 16}, rng, 1.5);
  Tensor seq = lif_sequence(x, LifParams{});
  auto [s, st] = lif_step(LifState{Tensor({16})}, x.reshaped({16}), LifParams{});
  EXPECT_EQ(seq.values(), s.values());
}

TEST(LifSequence, EmptyTimeAxisThrows) {
  EXPECT_THROW(lif_sequence(Tensor({0, 3}), LifParams{}), ContractError);
}

TEST(LifSequence, MatchesScalarTranscription) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = params(rng.uniform(0.3, 2.0), rng.uniform(-0.5, 0.2), rng.uniform(0.0, 1.0));
    const std::size_t T = 1 + rng.below(12), n = 1 + rng.below(6);
    Tensor x = random_normal({T, n}, rng, 1.2);
    Tensor s = lif_sequence(x, p);
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<double> col;
      for (std::size_t t = 0; t < T; ++t) col.push_back(x[t * n + j]);
      auto ref = oracle::lif_scalar(col, 0.0, p.v_threshold, p.v_reset, p.leak);
      for (std::size_t t = 0; t < T; ++t) ASSERT_EQ(s[t * n + j], ref[t]);
    }
  }
}

TEST(LifInvariants, BinaryResetAndLeakHold) {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const auto p = params(rng.uniform(0.2, 2.0), rng.uniform(-1.0, 0.1), rng.uniform(0.0, 1.0));
    Tensor v = random_normal({8}, rng, 0.5), x = random_normal({8}, rng, 1.5);
    auto [s, next] = lif_step(LifState{v}, x, p);
    for (std::size_t i = 0; i < 8; ++i) {
      ASSERT_TRUE(s[i] == 0.0 || s[i] == 1.0);
      const double vs = v[i] + x[i];
      if (s[i] == 1.0) {
        ASSERT_EQ(next.membrane[i], p.v_reset);
      } else {
        ASSERT_EQ(next.membrane[i], (1.0 - p.leak) * vs);
      }
    }
  }
}

TEST(LifInvariants, FirstSpikeAtCeilThresholdOverInput) {
  // Inputs are dyadic so repeated addition is exact.
  for (double c : {0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 1.0, 1.5}) {
    for (double v_th : {0.5, 1.0, 2.0}) {
      Tensor s = lif_sequence(Tensor({40, 1}, c), params(v_th, 0.0, 0.0));
      std::size_t first = 0;
      while (first < 40 && s[first] == 0.0) ++first;
      EXPECT_EQ(first + 1, static_cast<std::size_t>(std::ceil(v_th / c))) << c << " " << v_th;
    }
  }
}

TEST(LifInvariants, Causality) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = 8, n = 5;
    Tensor x = random_normal({T, n}, rng, 1.5);
    Tensor base = lif_sequence(x, LifParams{});
    const std::size_t t0 = rng.below(T);
    Tensor y = x;
    for (std::size_t i = t0 * n; i < T * n; ++i) y[i] += rng.normal(0.0, 2.0);
    Tensor pert = lif_sequence(y, LifParams{});
    for (std::size_t i = 0; i < t0 * n; ++i) ASSERT_EQ(base[i], pert[i]);
  }
}

TEST(Surrogate, PeakAndSupport) {
  const auto p = params(1.0, 0.0, 0.5, 0.5);
  EXPECT_EQ(surrogate_derivative(1.0, p), 2.0);
  EXPECT_EQ(surrogate_derivative(1.5, p), 0.0);
  EXPECT_EQ(surrogate_derivative(0.4, p), 0.0);
  EXPECT_DOUBLE_EQ(surrogate_derivative(1.25, p), 1.0);
}

TEST(Surrogate, IntegratesToOne) {
  for (double w : {0.25, 1.0, 3.0}) {
    const auto p = params(1.0, 0.0, 0.5, w);
    const double area =
        oracle::trapezoid([&](double v) { return surrogate_derivative(v, p); }, -10.0, 10.0, 20000);
    EXPECT_LT(std::abs(area - 1.0), 1e-3) << w;
  }
}

TEST(Surrogate, RelaxedSpikeIsItsIntegral) {
  const auto p = params(1.0, 0.0, 0.5, 0.8);
  for (double v = -1.0; v <= 3.0; v += 0.05) {
    const double integral =
        oracle::trapezoid([&](double u) { return surrogate_derivative(u, p); }, -5.0, v, 40000);
    EXPECT_NEAR(relaxed_spike(v, p), integral, 1e-6) << v;
  }
  Tensor vs({3}, std::vector<double>{0.0, 1.0, 1.4});
  Tensor g = surrogate_grad(vs, p);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(g[i], surrogate_derivative(vs[i], p));
}

TEST(SpikeNeuron, HardForwardMatchesLifSequence) {
  Rng rng(12);
  const std::size_t T = 4, B = 3;
  Tensor x = random_normal({T * B, 2, 3}, rng, 1.5);
  Tape tape(false);
  auto s = spike_neuron(tape, make_var(x), T, LifParams{});
  Tensor ref = lif_sequence(x.reshaped({T, B * 6}), LifParams{});
  EXPECT_EQ(s->values(), ref.values());
}

TEST(SpikeNeuron, LeadingAxisMustDivideByTimesteps) {
  Tape tape(false);
  EXPECT_THROW(spike_neuron(tape, make_var(Tensor({5, 2})), 2, LifParams{}), DimensionError);
}

}  // namespace
}  // namespace egsf
