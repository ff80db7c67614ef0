// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include "egsf/blocks.hpp"

#include <algorithm>
#include <cmath>

#include "egsf/errors.hpp"

namespace egsf {

void FiringStats::add(const std::string& name, const Tensor& spikes) {
  double count = 0.0;
  std::size_t odd = 0;
  for (double v : spikes.data()) {
    count += v;
    if (v != 0.0 && v != 1.0) ++odd;
  }
  auto it = std::find_if(records_.begin(), records_.end(),
                         [&](const FiringRecord& r) { return r.name == name; });
  if (it == records_.end()) {
    records_.push_back({name, 0.0, 0.0, 0});
    it = records_.end() - 1;
  }
  it->spikes += count;
  it->slots += static_cast<double>(spikes.numel());
  it->non_binary += odd;
}

void FiringStats::merge(const FiringStats& other) {
  for (const auto& r : other.records_) {
    auto it = std::find_if(records_.begin(), records_.end(),
                           [&](const FiringRecord& x) { return x.name == r.name; });
    if (it == records_.end()) {
      records_.push_back(r);
    } else {
      it->spikes += r.spikes;
      it->slots += r.slots;
      it->non_binary += r.non_binary;
    }
  }
}

double FiringStats::rate(const std::string& name) const {
  for (const auto& r : records_) {
    if (r.name == name) return r.rate();
  }
  throw ContractError("no firing record named '" + name + "'");
}

bool FiringStats::contains(const std::string& name) const {
  return std::any_of(records_.begin(), records_.end(),
                     [&](const FiringRecord& r) { return r.name == name; });
}

std::size_t FiringStats::non_binary() const {
  std::size_t n = 0;
  for (const auto& r : records_) n += r.non_binary;
  return n;
}

Var spiking(ForwardContext& ctx, const Var& x, const std::string& name) {
  Var s = spike_neuron(ctx.tape, x, ctx.timesteps, ctx.lif);
  if (ctx.firing) ctx.firing->add(name, *s);
  return s;
}

BatchNormLayer::BatchNormLayer(std::size_t channels, std::string layer_name)
    : gamma(make_param(Tensor({channels}, 1.0))),
      beta(make_param(Tensor({channels}, 0.0))),
      running_mean(make_var(Tensor({channels}, 0.0))),
      running_var(make_var(Tensor({channels}, 1.0))),
      name(std::move(layer_name)) {}

Var BatchNormLayer::forward(ForwardContext& ctx, const Var& x, std::size_t channel_axis) const {
  return batch_norm(ctx.tape, x, gamma, beta, *running_mean, *running_var, ctx.training,
                    channel_axis);
}

void BatchNormLayer::collect(std::vector<NamedParam>& params,
                             std::vector<NamedParam>& buffers) const {
  params.push_back({name + ".gamma", gamma});
  params.push_back({name + ".beta", beta});
  buffers.push_back({name + ".running_mean", running_mean});
  buffers.push_back({name + ".running_var", running_var});
}

ConvSnnBlock::ConvSnnBlock(std::size_t channels, std::size_t kernel, Rng& rng, std::string name)
    : depthwise(make_param(random_normal({channels, 1, kernel, kernel}, rng,
                                         1.0 / static_cast<double>(kernel)))),
      pointwise(make_param(random_normal({channels, channels, 1, 1}, rng,
                                         1.0 / std::sqrt(static_cast<double>(channels))))),
      bn(channels, name + ".bn"),
      name_(std::move(name)),
      kernel_(kernel) {
  if (kernel % 2 == 0) throw ContractError("ConvSnnBlock: kernel extent must be odd");
}

Var ConvSnnBlock::forward(ForwardContext& ctx, const Var& x) const {
  if (x->rank() != 4 || x->dim(1) != depthwise->dim(0)) {
    throw DimensionError(name_ + ": input " + shape_string(x->shape()) + " does not have " +
                         std::to_string(depthwise->dim(0)) + " channels");
  }
  Var s = spiking(ctx, x, spike_name());
  Var r = conv2d(ctx.tape, s, depthwise, {ConvMode::kDepthwise, 1, kernel_ / 2});
  r = conv2d(ctx.tape, r, pointwise, {ConvMode::kPointwise, 1, 0});
  r = bn.forward(ctx, r, 1);
  return add(ctx.tape, x, r);
}

void ConvSnnBlock::collect(std::vector<NamedParam>& params,
                           std::vector<NamedParam>& buffers) const {
  params.push_back({name_ + ".dw", depthwise});
  params.push_back({name_ + ".pw", pointwise});
  bn.collect(params, buffers);
}

RepConv::RepConv(std::size_t in, std::size_t out, Rng& rng, std::string name)
    : weight(make_param(random_normal({out, in}, rng, 1.0 / std::sqrt(static_cast<double>(in))))),
      bn(out, name + ".bn"),
      name_(std::move(name)) {}

Var RepConv::forward(ForwardContext& ctx, const Var& x) const {
  if (fused_) {
    if (ctx.training) throw ContractError(name_ + ": fused RepConv cannot run in training mode");
    return linear(ctx.tape, x, fused_weight_, fused_bias_);
  }
  Var y = linear(ctx.tape, x, weight);
  return bn.forward(ctx, y, y->rank() - 1);
}

void RepConv::fuse() {
  if (fused_) throw ContractError(name_ + ": RepConv is already fused");
  const std::size_t out = weight->dim(0), in = weight->dim(1);
  const BatchNormConfig defaults;
  Tensor w({out, in});
  Tensor b({out});
  for (std::size_t o = 0; o < out; ++o) {
    const double inv_std = 1.0 / std::sqrt((*bn.running_var)[o] + defaults.eps);
    const double a = (*bn.gamma)[o] * inv_std;
    for (std::size_t i = 0; i < in; ++i) w[o * in + i] = (*weight)[o * in + i] * a;
    b[o] = (*bn.beta)[o] - a * (*bn.running_mean)[o];
  }
  fused_weight_ = make_var(std::move(w));
  fused_bias_ = make_var(std::move(b));
  fused_ = true;
}

void RepConv::collect(std::vector<NamedParam>& params, std::vector<NamedParam>& buffers) const {
  params.push_back({name_ + ".weight", weight});
  bn.collect(params, buffers);
}

SpikeAttentionBlock::SpikeAttentionBlock(std::size_t dim, Rng& rng, std::string name)
    : query(dim, dim, rng, name + ".q"),
      key(dim, dim, rng, name + ".k"),
      value(dim, dim, rng, name + ".v"),
      proj(dim, dim, rng, name + ".proj"),
      dim_(dim),
      name_(std::move(name)) {
  if (dim == 0) throw ContractError("SpikeAttentionBlock: d_k must be positive");
}

SpikeQkv SpikeAttentionBlock::spike_qkv(ForwardContext& ctx, const Var& x) const {
  if (x->rank() != 3 || x->dim(2) != dim_) {
    throw DimensionError(name_ + ": expected tokens [T*B, N, " + std::to_string(dim_) + "], got " +
                         shape_string(x->shape()));
  }
  Var u = spiking(ctx, x, name_ + ".sn_in");
  SpikeQkv out;
  out.q = spiking(ctx, query.forward(ctx, u), name_ + ".sn_q");
  out.k = spiking(ctx, key.forward(ctx, u), name_ + ".sn_k");
  out.v = spiking(ctx, value.forward(ctx, u), name_ + ".sn_v");
  return out;
}

AttentionResult SpikeAttentionBlock::forward(ForwardContext& ctx, const Var& x) const {
  SpikeQkv qkv = spike_qkv(ctx, x);
  AttentionResult result;
  Var raw = batched_matmul(ctx.tape, qkv.q, qkv.k, /*transpose_b=*/true);
  result.scores = scale(ctx.tape, raw, 1.0 / std::sqrt(static_cast<double>(dim_)));
  result.attention = row_normalize(ctx.tape, result.scores, kRowEps);
  Var mixed = batched_matmul(ctx.tape, result.scores, qkv.v);
  result.x = add(ctx.tape, x, proj.forward(ctx, mixed));
  return result;
}

void SpikeAttentionBlock::fuse() {
  for (RepConv* rc : {&query, &key, &value, &proj}) rc->fuse();
}

void SpikeAttentionBlock::collect(std::vector<NamedParam>& params,
                                  std::vector<NamedParam>& buffers) const {
  for (const RepConv* rc : {&query, &key, &value, &proj}) rc->collect(params, buffers);
}

}  // namespace egsf
