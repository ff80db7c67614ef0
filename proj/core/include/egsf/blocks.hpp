// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "egsf/lif.hpp"
#include "egsf/ops.hpp"
#include "egsf/optim.hpp"
#include "egsf/rng.hpp"

namespace egsf {

struct FiringRecord {
  std::string name;
  double spikes = 0.0;
  double slots = 0.0;
  /// Elements that were neither 0.0 nor 1.0 (always zero in hard mode).
  std::size_t non_binary = 0;
  double rate() const { return slots > 0.0 ? spikes / slots : 0.0; }
};

/// Mean firing rate of every spiking layer touched by a forward pass.
class FiringStats {
 public:
  void add(const std::string& name, const Tensor& spikes);
  void merge(const FiringStats& other);
  double rate(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t non_binary() const;
  const std::vector<FiringRecord>& records() const { return records_; }

 private:
  std::vector<FiringRecord> records_;
};

/// Everything a block needs for one multi-step forward pass. Tensors flowing
/// between blocks are time-major: [T*B, ...] with slice t*B + b.
struct ForwardContext {
  Tape& tape;
  bool training = false;
  std::size_t timesteps = 1;
  LifParams lif;
  FiringStats* firing = nullptr;
};

/// Applies the spiking nonlinearity and logs its firing rate under `name`.
Var spiking(ForwardContext& ctx, const Var& x, const std::string& name);

class BatchNormLayer {
 public:
  BatchNormLayer() = default;
  BatchNormLayer(std::size_t channels, std::string name);

  Var forward(ForwardContext& ctx, const Var& x, std::size_t channel_axis) const;
  void collect(std::vector<NamedParam>& params, std::vector<NamedParam>& buffers) const;

  Var gamma, beta, running_mean, running_var;
  std::string name;
};

/// Membrane-shortcut convolution block: x + BN(Conv_p(Conv_d(SN(x)))).
class ConvSnnBlock {
 public:
  ConvSnnBlock(std::size_t channels, std::size_t kernel, Rng& rng, std::string name);

  /// x: [T*B, C, H, W]; output has the same shape.
  Var forward(ForwardContext& ctx, const Var& x) const;
  void collect(std::vector<NamedParam>& params, std::vector<NamedParam>& buffers) const;

  std::string spike_name() const { return name_ + ".sn"; }
  const std::string& name() const { return name_; }

  Var depthwise;  ///< [C, 1, k, k]
  Var pointwise;  ///< [C, C, 1, 1]
  BatchNormLayer bn;

 private:
  std::string name_;
  std::size_t kernel_;
};

/// Re-parameterizable 1x1 convolution over channel-last tokens: Conv -> BN
/// while training, a single biased kernel after fuse().
class RepConv {
 public:
  RepConv(std::size_t in, std::size_t out, Rng& rng, std::string name);

  Var forward(ForwardContext& ctx, const Var& x) const;

  /// Folds the running statistics into the kernel and a bias. Fusing twice
  /// throws ContractError.
  void fuse();
  bool fused() const { return fused_; }
  const Tensor& fused_kernel() const { return *fused_weight_; }
  const Tensor& fused_bias() const { return *fused_bias_; }

  void collect(std::vector<NamedParam>& params, std::vector<NamedParam>& buffers) const;

  Var weight;  ///< [out, in]
  BatchNormLayer bn;

 private:
  std::string name_;
  bool fused_ = false;
  Var fused_weight_;
  Var fused_bias_;
};

struct SpikeQkv {
  Var q, k, v;  ///< binary, [T*B, N, d]
};

struct AttentionResult {
  Var x;          ///< [T*B, N, d]
  Var scores;     ///< Q K^T / sqrt(d_k), [T*B, N, N]
  Var attention;  ///< row-normalized scores, [T*B, N, N]
};

/// Spike-driven self-attention with a membrane shortcut:
///   {Q,K,V} = SN(RepConv(SN(x)))
///   x'      = x + RepConv((Q K^T / sqrt(d_k)) V)
/// No softmax. The attention map is the row-normalized score matrix.
class SpikeAttentionBlock {
 public:
  static constexpr double kRowEps = 1e-6;

  SpikeAttentionBlock(std::size_t dim, Rng& rng, std::string name);

  SpikeQkv spike_qkv(ForwardContext& ctx, const Var& x) const;
  AttentionResult forward(ForwardContext& ctx, const Var& x) const;

  void fuse();
  void collect(std::vector<NamedParam>& params, std::vector<NamedParam>& buffers) const;
  std::size_t head_dim() const { return dim_; }
  const std::string& name() const { return name_; }

  RepConv query, key, value, proj;

 private:
  std::size_t dim_;
  std::string name_;
};

}  // namespace egsf
