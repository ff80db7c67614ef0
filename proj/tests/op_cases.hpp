// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0
//
// One gradient-check case per differentiable op. Each loss is a random
// weighting of the op output so every output element contributes.

#pragma once

#include <string>
#include <vector>

#include "egsf/gaze.hpp"
#include "egsf/grad_check.hpp"
#include "egsf/lif.hpp"
#include "egsf/ops.hpp"
#include "egsf/rng.hpp"

namespace egsf::testing {

struct OpCase {
  std::string name;
  std::vector<NamedParam> params;
  LossClosure loss;
};

inline Var weighted_sum(Tape& tape, const Var& y, const Tensor& r) {
  return sum(tape, mul(tape, y, make_var(r)));
}

inline std::vector<OpCase> op_cases(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<OpCase> cases;
  auto param = [&](Shape s, double sd = 1.0) { return make_param(random_normal(std::move(s), rng, sd)); };
  auto weights = [&](const Shape& s) { return random_normal(s, rng, 1.0); };
  auto unary = [&](std::string name, Var x, auto fn) {
    Tape probe(false);
    const Tensor r = weights(fn(probe, x)->shape());
    cases.push_back({name, {{"x", x}}, [x, r, fn](Tape& t) { return weighted_sum(t, fn(t, x), r); }});
  };
  auto binary = [&](std::string name, Var a, Var b, auto fn) {
    Tape probe(false);
    const Tensor r = weights(fn(probe, a, b)->shape());
    cases.push_back({name, {{"a", a}, {"b", b}},
                     [a, b, r, fn](Tape& t) { return weighted_sum(t, fn(t, a, b), r); }});
  };

  binary("matmul", param({3, 4}), param({4, 2}),
         [](Tape& t, const Var& a, const Var& b) { return matmul(t, a, b); });
  binary("batched_matmul", param({2, 3, 4}), param({2, 4, 3}),
         [](Tape& t, const Var& a, const Var& b) { return batched_matmul(t, a, b); });
  binary("batched_matmul_bt", param({2, 3, 4}), param({2, 5, 4}),
         [](Tape& t, const Var& a, const Var& b) { return batched_matmul(t, a, b, true); });
  {
    Var x = param({2, 3, 4}), w = param({5, 4}), b = param({5});
    Tape probe(false);
    const Tensor r = weights(linear(probe, x, w, b)->shape());
    cases.push_back({"linear", {{"x", x}, {"weight", w}, {"bias", b}},
                     [=](Tape& t) { return weighted_sum(t, linear(t, x, w, b), r); }});
  }
  binary("conv2d_pointwise", param({2, 3, 5, 5}), param({4, 3, 1, 1}),
         [](Tape& t, const Var& a, const Var& b) {
           return conv2d(t, a, b, {ConvMode::kPointwise, 1, 0});
         });
  binary("conv2d_depthwise", param({2, 3, 5, 5}), param({3, 1, 3, 3}),
         [](Tape& t, const Var& a, const Var& b) {
           return conv2d(t, a, b, {ConvMode::kDepthwise, 1, 1});
         });
  binary("conv2d_depthwise_strided", param({1, 2, 6, 6}), param({2, 1, 3, 3}),
         [](Tape& t, const Var& a, const Var& b) {
           return conv2d(t, a, b, {ConvMode::kDepthwise, 2, 1});
         });
  binary("conv2d_pointwise_strided", param({2, 6, 6}), param({3, 2, 1, 1}),
         [](Tape& t, const Var& a, const Var& b) {
           return conv2d(t, a, b, {ConvMode::kPointwise, 2, 0});
         });
  for (bool training : {true, false}) {
    Var x = param({3, 2, 3, 3}), g = make_param(random_uniform({2}, rng, 0.5, 1.5)),
        b = param({2});
    auto stats = std::make_shared<std::pair<Tensor, Tensor>>(Tensor({2}, 0.1), Tensor({2}, 1.3));
    auto fn = [=](Tape& t) {
      // Fresh copies so repeated evaluations see identical running stats.
      Tensor rm = stats->first, rv = stats->second;
      return batch_norm(t, x, g, b, rm, rv, training, 1);
    };
    Tape probe(false);
    const Tensor r = weights(fn(probe)->shape());
    cases.push_back({training ? "batch_norm_train" : "batch_norm_eval",
                     {{"x", x}, {"gamma", g}, {"beta", b}},
                     [=](Tape& t) { return weighted_sum(t, fn(t), r); }});
  }
  {
    Var x = param({2, 3, 4}), g = make_param(random_uniform({4}, rng, 0.5, 1.5)), b = param({4});
    auto fn = [=](Tape& t) {
      Tensor rm({4}, 0.0), rv({4}, 1.0);
      return batch_norm(t, x, g, b, rm, rv, true, 2);
    };
    Tape probe(false);
    const Tensor r = weights(fn(probe)->shape());
    cases.push_back({"batch_norm_last_axis", {{"x", x}, {"gamma", g}, {"beta", b}},
                     [=](Tape& t) { return weighted_sum(t, fn(t), r); }});
  }
  binary("add", param({3, 4}), param({3, 4}),
         [](Tape& t, const Var& a, const Var& b) { return add(t, a, b); });
  binary("mul", param({3, 4}), param({3, 4}),
         [](Tape& t, const Var& a, const Var& b) { return mul(t, a, b); });
  unary("scale", param({3, 4}), [](Tape& t, const Var& a) { return scale(t, a, -1.7); });
  unary("sum", param({3, 4}), [](Tape& t, const Var& a) { return sum(t, a); });
  unary("mean", param({3, 4}), [](Tape& t, const Var& a) { return mean(t, a); });
  unary("reshape", param({3, 4}), [](Tape& t, const Var& a) { return reshape(t, a, {2, 6}); });
  unary("repeat_leading", param({2, 3}),
        [](Tape& t, const Var& a) { return repeat_leading(t, a, 3); });
  unary("mean_leading", param({6, 3}), [](Tape& t, const Var& a) { return mean_leading(t, a, 3); });
  unary("mean_axis1", param({2, 3, 4}), [](Tape& t, const Var& a) { return mean_axis1(t, a); });
  unary("patchify", param({2, 2, 4, 4}), [](Tape& t, const Var& a) { return patchify(t, a, 2); });
  unary("row_normalize", make_param(random_uniform({2, 3, 4}, rng, 0.1, 1.0)),
        [](Tape& t, const Var& a) { return row_normalize(t, a, 1e-6); });
  {
    Var logits = param({4, 3});
    const std::vector<std::size_t> labels{0, 2, 1, 2};
    cases.push_back({"softmax_cross_entropy", {{"logits", logits}},
                     [=](Tape& t) { return softmax_cross_entropy(t, logits, labels); }});
  }
  {
    Var a = param({3, 4});
    const Tensor target = weights({3, 4});
    cases.push_back({"mean_squared_error", {{"a", a}},
                     [=](Tape& t) { return mean_squared_error(t, a, target); }});
  }
  {
    Var a = make_param(random_uniform({2, 4, 4}, rng, 0.0, 0.5));
    const Tensor target = random_uniform({2, 4, 4}, rng, 0.0, 0.5);
    Var c = make_param(Tensor::scalar(0.7));
    cases.push_back({"alignment_total_loss", {{"a_t", a}, {"cls", c}}, [=](Tape& t) {
                       return total_loss(t, c, alignment_loss(t, a, target), 2.5);
                     }});
  }
  {
    // Inputs straddle the threshold so the relaxed ramp is exercised.
    Var x = make_param(random_normal({3 * 2, 5}, rng, 0.6));
    for (double& v : x->data()) v += 0.6;
    LifParams lif;
    Tape probe(false);
    const Tensor r = weights({3 * 2, 5});
    cases.push_back({"spike_neuron", {{"x", x}}, [=](Tape& t) {
                       return weighted_sum(t, spike_neuron(t, x, 3, lif), r);
                     }});
  }
  return cases;
}

}  // namespace egsf::testing
