// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "egsf/blocks.hpp"
#include "egsf/errors.hpp"
#include "egsf/grad_check.hpp"
#include "egsf/model.hpp"
#include "egsf/ops.hpp"
#include "egsf/rng.hpp"

namespace egsf {
namespace {

void fill(const Var& v, double value) {
  for (double& x : v->data()) x = value;
}

bool binary(const Tensor& t) {
  for (double v : t.data())
    if (v != 0.0 && v != 1.0) return false;
  return true;
}

ModelConfig small_config() {
  ModelConfig c;
  c.image_size = 8;
  c.stem_channels = 3;
  c.conv_blocks = 1;
  c.patch_size = 4;
  c.token_dim = 4;
  c.attention_blocks = 1;
  c.timesteps = 2;
  return c;
}

TEST(ConvSnnBlock, ZeroBranchIsIdentity) {
  Rng rng(1);
  ConvSnnBlock block(4, 3, rng, "b");
  fill(block.depthwise, 0.0);
  fill(block.pointwise, 0.0);
  Tape tape(false);
  ForwardContext ctx{tape, true, 2, LifParams{}, nullptr};
  auto x = make_var(random_normal({4, 4, 5, 5}, rng, 2.0));
  EXPECT_EQ(block.forward(ctx, x)->values(), x->values());
}

TEST(ConvSnnBlock, SilentInputAddsBnOfZero) {
  Rng rng(2);
  ConvSnnBlock block(2, 3, rng, "b");
  fill(block.bn.beta, 0.25);
  Tape tape(false);
  ForwardContext ctx{tape, false, 1, LifParams{}, nullptr};
  auto x = make_var(Tensor({1, 2, 4, 4}, 0.5));
  auto y = block.forward(ctx, x);
  // Eval BN of a zero map with running stats (0, 1) is beta.
  for (double v : y->data()) EXPECT_DOUBLE_EQ(v, 0.75);
}

TEST(ConvSnnBlock, ResidualEqualsRecomposedBranch) {
  Rng rng(3);
  ConvSnnBlock block(3, 3, rng, "b");
  auto x = make_var(random_normal({4, 3, 6, 6}, rng, 1.5));
  Tape tape(false);
  ForwardContext ctx{tape, false, 2, LifParams{}, nullptr};
  auto y = block.forward(ctx, x);

  Tape t2(false);
  Tensor s = lif_sequence(x->reshaped({2, 2 * 3 * 36}), LifParams{});
  Tensor r = kernels::conv2d(s.reshaped({4, 3, 6, 6}), *block.depthwise, {ConvMode::kDepthwise, 1, 1});
  r = kernels::conv2d(r, *block.pointwise, {ConvMode::kPointwise, 1, 0});
  Tensor rm = *block.bn.running_mean, rv = *block.bn.running_var;
  auto bn = batch_norm(t2, make_var(r), block.bn.gamma, block.bn.beta, rm, rv, false, 1);
  for (std::size_t i = 0; i < y->numel(); ++i) EXPECT_NEAR((*y)[i] - (*x)[i], (*bn)[i], 1e-12);
}

TEST(ConvSnnBlock, ChannelMismatchThrows) {
  Rng rng(4);
  ConvSnnBlock block(3, 3, rng, "b");
  Tape tape(false);
  ForwardContext ctx{tape, false, 1, LifParams{}, nullptr};
  EXPECT_THROW(block.forward(ctx, make_var(Tensor({1, 2, 4, 4}))), DimensionError);
}

TEST(RepConv, IdentityBnFusesToOriginalKernel) {
  Rng rng(5);
  RepConv rc(4, 3, rng, "rc");
  rc.fuse();
  for (std::size_t i = 0; i < rc.weight->numel(); ++i)
    EXPECT_NEAR(rc.fused_kernel()[i], (*rc.weight)[i], 1e-5 * std::abs((*rc.weight)[i]));
  for (double b : rc.fused_bias().data()) EXPECT_EQ(b, 0.0);
}

TEST(RepConv, ZeroGammaFusesToBias) {
  Rng rng(6);
  RepConv rc(4, 3, rng, "rc");
  fill(rc.bn.gamma, 0.0);
  for (std::size_t o = 0; o < 3; ++o) (*rc.bn.beta)[o] = 0.5 * static_cast<double>(o);
  rc.fuse();
  for (double w : rc.fused_kernel().data()) EXPECT_EQ(w, 0.0);
  for (std::size_t o = 0; o < 3; ++o) EXPECT_EQ(rc.fused_bias()[o], 0.5 * static_cast<double>(o));
}

TEST(RepConv, FusedMatchesUnfused) {
  Rng rng(7);
  RepConv rc(5, 4, rng, "rc");
  // Put the running statistics somewhere non-trivial first.
  for (int i = 0; i < 5; ++i) {
    Tape t(false);
    ForwardContext ctx{t, true, 1, LifParams{}, nullptr};
    rc.forward(ctx, make_var(random_normal({3, 6, 5}, rng, 2.0)));
  }
  for (std::size_t o = 0; o < 4; ++o) {
    (*rc.bn.gamma)[o] = rng.uniform(0.5, 2.0);
    (*rc.bn.beta)[o] = rng.normal();
  }
  std::vector<Tensor> inputs;
  std::vector<Tensor> unfused;
  for (int i = 0; i < 10; ++i) {
    inputs.push_back(random_normal({2, 6, 5}, rng, 2.0));
    Tape t(false);
    ForwardContext ctx{t, false, 1, LifParams{}, nullptr};
    unfused.push_back(*rc.forward(ctx, make_var(inputs.back())));
  }
  rc.fuse();
  EXPECT_TRUE(rc.fused());
  for (int i = 0; i < 10; ++i) {
    Tape t(false);
    ForwardContext ctx{t, false, 1, LifParams{}, nullptr};
    Tensor y = *rc.forward(ctx, make_var(inputs[i]));
    for (std::size_t j = 0; j < y.numel(); ++j) EXPECT_LT(std::abs(y[j] - unfused[i][j]), 1e-5);
  }
}

TEST(RepConv, FusingTwiceAndTrainingFusedThrow) {
  Rng rng(8);
  RepConv rc(2, 2, rng, "rc");
  rc.fuse();
  EXPECT_THROW(rc.fuse(), ContractError);
  Tape t(false);
  ForwardContext ctx{t, true, 1, LifParams{}, nullptr};
  EXPECT_THROW(rc.forward(ctx, make_var(Tensor({1, 2, 2}))), ContractError);
}

TEST(SpikeAttention, ZeroInputGivesZeroQkvAndUniformRows) {
  Rng rng(9);
  SpikeAttentionBlock block(4, rng, "a");
  Tape tape(false);
  ForwardContext ctx{tape, false, 1, LifParams{}, nullptr};
  auto x = make_var(Tensor({1, 5, 4}));
  SpikeQkv qkv = block.spike_qkv(ctx, x);
  for (const Var& v : {qkv.q, qkv.k, qkv.v})
    for (double e : v->data()) EXPECT_EQ(e, 0.0);
  AttentionResult r = block.forward(ctx, x);
  for (double a : r.attention->data()) EXPECT_NEAR(a, 0.2, 1e-12);
  for (double s : r.scores->data()) EXPECT_EQ(s, 0.0);
}

TEST(SpikeAttention, LowThresholdForcesAllOnesAndHandScores) {
  Rng rng(10);
  SpikeAttentionBlock block(4, rng, "a");
  for (RepConv* rc : {&block.query, &block.key, &block.value, &block.proj}) {
    fill(rc->weight, 0.0);
    for (std::size_t i = 0; i < 4; ++i) (*rc->weight)[i * 4 + i] = 1.0;
  }
  LifParams lif;
  lif.v_threshold = -10.0;
  lif.v_reset = -20.0;
  Tape tape(false);
  ForwardContext ctx{tape, false, 1, lif, nullptr};
  Rng r2(11);
  auto x = make_var(random_uniform({1, 4, 4}, r2, 0.5, 1.0));
  SpikeQkv qkv = block.spike_qkv(ctx, x);
  for (double e : qkv.q->data()) EXPECT_EQ(e, 1.0);
  AttentionResult r = block.forward(ctx, x);
  for (double s : r.scores->data()) EXPECT_DOUBLE_EQ(s, 2.0);
  for (double a : r.attention->data()) EXPECT_NEAR(a, 0.25, 1e-12);
}

TEST(SpikeAttention, QkvBinaryAndRowsSumToOne) {
  Rng rng(12);
  SpikeAttentionBlock block(6, rng, "a");
  for (int trial = 0; trial < 20; ++trial) {
    Tape tape(false);
    ForwardContext ctx{tape, true, 2, LifParams{}, nullptr};
    auto x = make_var(random_normal({4, 7, 6}, rng, 2.0));
    SpikeQkv qkv = block.spike_qkv(ctx, x);
    EXPECT_TRUE(binary(*qkv.q) && binary(*qkv.k) && binary(*qkv.v));
    AttentionResult r = block.forward(ctx, x);
    const std::size_t rows = r.attention->numel() / 7;
    for (std::size_t i = 0; i < rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 7; ++j) s += (*r.attention)[i * 7 + j];
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(SpikeAttention, WrongWidthThrows) {
  Rng rng(13);
  SpikeAttentionBlock block(4, rng, "a");
  Tape tape(false);
  ForwardContext ctx{tape, false, 1, LifParams{}, nullptr};
  EXPECT_THROW(block.forward(ctx, make_var(Tensor({1, 3, 5}))), DimensionError);
  EXPECT_THROW(SpikeAttentionBlock(0, rng, "z"), ContractError);
}

TEST(Model, OutputShapes) {
  EgSpikeFormer model(ModelConfig{}, LifParams{}, 0);
  Rng rng(1);
  auto out = model_forward(model, random_uniform({1, 32, 32}, rng, 0.0, 1.0), 4);
  EXPECT_EQ(out.logits.shape(), (Shape{2}));
  EXPECT_EQ(out.attention.shape(), (Shape{64, 64}));
  EXPECT_EQ(model.config().num_tokens(), 64u);
  for (const auto& r : out.firing.records()) {
    EXPECT_GE(r.rate(), 0.0);
    EXPECT_LE(r.rate(), 1.0);
  }
}

TEST(Model, DeterministicForSeed) {
  Rng rng(2);
  Tensor img = random_uniform({1, 32, 32}, rng, 0.0, 1.0);
  EgSpikeFormer a(ModelConfig{}, LifParams{}, 42), b(ModelConfig{}, LifParams{}, 42);
  EXPECT_EQ(model_forward(a, img, 4).logits.values(), model_forward(b, img, 4).logits.values());
  EgSpikeFormer c(ModelConfig{}, LifParams{}, 43);
  EXPECT_NE(model_forward(a, img, 4).logits.values(), model_forward(c, img, 4).logits.values());
}

TEST(Model, ZeroImageSilencesNetwork) {
  EgSpikeFormer model(ModelConfig{}, LifParams{}, 3);
  auto out = model_forward(model, Tensor({1, 32, 32}), 4);
  ASSERT_FALSE(out.firing.records().empty());
  for (const auto& r : out.firing.records()) EXPECT_EQ(r.rate(), 0.0) << r.name;
}

TEST(Model, SingleTimestepIsOnePass) {
  EgSpikeFormer model(small_config(), LifParams{}, 4);
  Rng rng(4);
  Tensor img = random_uniform({1, 8, 8}, rng, 0.0, 1.0);
  auto out = model_forward(model, img, 1);
  Tape tape(false);
  auto batched = model.forward(tape, make_var(img.reshaped({1, 1, 8, 8})), false, 1);
  EXPECT_EQ(out.logits.values(), batched.logits->values());
}

TEST(Model, BatchedEqualsPerImageInEval) {
  EgSpikeFormer model(small_config(), LifParams{}, 5);
  Rng rng(5);
  Tensor batch = random_uniform({3, 1, 8, 8}, rng, 0.0, 1.0);
  Tape tape(false);
  auto out = model.forward(tape, make_var(batch), false);
  for (std::size_t b = 0; b < 3; ++b) {
    Tensor img({1, 8, 8});
    std::copy_n(batch.data().begin() + b * 64, 64, img.data().begin());
    auto single = model_forward(model, img, 2);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(single.logits[k], (*out.logits)[b * 2 + k], 1e-12);
  }
}

TEST(Model, EveryParameterReceivesGradient) {
  EgSpikeFormer model(small_config(), LifParams{}, 6);
  Rng rng(6);
  Tensor batch = random_uniform({8, 1, 8, 8}, rng, 0.0, 1.0);
  Tape tape;
  auto out = model.forward(tape, make_var(batch), true);
  std::vector<std::size_t> labels{0, 1, 0, 1, 1, 0, 0, 1};
  tape.backward(softmax_cross_entropy(tape, out.logits, labels));
  for (const auto& p : model.parameters()) {
    double norm = 0.0;
    for (double g : p.var->grad()) norm += std::abs(g);
    EXPECT_GT(norm, 0.0) << p.name;
  }
}

TEST(Model, FullLossGradCheckAgainstRelaxedForward) {
  EgSpikeFormer model(small_config(), LifParams{}, 7);
  Rng rng(7);
  auto batch = make_var(random_uniform({4, 1, 8, 8}, rng, 0.0, 1.0));
  std::vector<std::size_t> labels{0, 1, 1, 0};
  auto params = model.parameters();
  GradCheckOptions opts;
  opts.tolerance = 1e-3;
  opts.total_probes = 30;
  opts.seed = 3;
  auto report = grad_check(
      [&](Tape& t) {
        auto out = model.forward(t, batch, true);
        return softmax_cross_entropy(t, out.logits, labels);
      },
      params, opts);
  EXPECT_TRUE(report.passed()) << report.max_rel_error();
}

TEST(Model, FuseKeepsInferenceOutputs) {
  EgSpikeFormer model(small_config(), LifParams{}, 8);
  Rng rng(8);
  Tensor img = random_uniform({1, 8, 8}, rng, 0.0, 1.0);
  auto before = model_forward(model, img, 2);
  model.fuse();
  auto after = model_forward(model, img, 2);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(before.logits[k], after.logits[k], 1e-5);
  EXPECT_THROW(model.fuse(), ContractError);
}

TEST(Model, InvalidInputsRejected) {
  EgSpikeFormer model(small_config(), LifParams{}, 9);
  EXPECT_THROW(model_forward(model, Tensor({1, 8, 8}), 0), ContractError);
  EXPECT_THROW(model_forward(model, Tensor({1, 9, 9}), 1), DimensionError);
  ModelConfig bad = small_config();
  bad.patch_size = 3;
  EXPECT_THROW(bad.validate(), std::exception);
}

}  // namespace
}  // namespace egsf
