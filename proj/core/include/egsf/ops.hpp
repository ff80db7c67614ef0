// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "egsf/tape.hpp"
#include "egsf/tensor.hpp"

namespace egsf {

enum class ConvMode { kPointwise, kDepthwise };

/// Pointwise kernels are [C_out, C_in, 1, 1]; depthwise kernels are
/// [C, 1, k, k] with one filter per input channel.
struct ConvSpec {
  ConvMode mode = ConvMode::kPointwise;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

struct BatchNormConfig {
  double eps = 1e-5;
  double momentum = 0.1;
};

/// Raw dense kernels. Row-major, no tape, no allocation beyond the output.
namespace kernels {

/// C (m x n) = op(A) * op(B), accumulating into C when `accumulate`.
/// A is m x k (or k x m when trans_a); B is k x n (or n x k when trans_b).
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool trans_a, bool trans_b,
          bool accumulate);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor conv2d(const Tensor& input, const Tensor& kernel, const ConvSpec& spec);

}  // namespace kernels

/// Output extent of a convolution along one axis; throws when the kernel
/// does not fit inside the padded input.
std::size_t conv_output_extent(std::size_t in, std::size_t k, std::size_t stride,
                               std::size_t padding);

// Differentiable ops. Each records its adjoint when the tape is recording
// and any input requires a gradient.

Var matmul(Tape& tape, const Var& a, const Var& b);

/// Per-slice product over a leading batch axis: [B,m,k] x [B,k,n], or
/// [B,m,k] x [B,n,k]^T when `transpose_b`.
Var batched_matmul(Tape& tape, const Var& a, const Var& b, bool transpose_b = false);

/// y[..., out] = x[..., in] * weight[out, in]^T (+ bias[out]).
/// This is the 1x1 convolution applied to channel-last token tensors.
Var linear(Tape& tape, const Var& x, const Var& weight, const Var& bias = nullptr);

/// Cross-correlation over [C,H,W] or [B,C,H,W] inputs.
Var conv2d(Tape& tape, const Var& input, const Var& kernel, const ConvSpec& spec);

/// Normalizes over every axis except `channel_axis`. Training mode uses batch
/// statistics (biased variance) and updates the running statistics in place
/// (unbiased variance); inference mode uses the running statistics.
Var batch_norm(Tape& tape, const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
               Tensor& running_var, bool training, std::size_t channel_axis,
               const BatchNormConfig& config = {});

Var add(Tape& tape, const Var& a, const Var& b);
Var mul(Tape& tape, const Var& a, const Var& b);
Var scale(Tape& tape, const Var& a, double factor);
Var sum(Tape& tape, const Var& a);
Var mean(Tape& tape, const Var& a);
Var reshape(Tape& tape, const Var& a, Shape shape);

/// [B, ...] -> [T*B, ...], slice t*B+b equal to input slice b.
Var repeat_leading(Tape& tape, const Var& a, std::size_t times);
/// [T*B, ...] -> [B, ...], mean over the T groups.
Var mean_leading(Tape& tape, const Var& a, std::size_t groups);
/// Mean over axis 1 of a rank-3 tensor: [B, N, d] -> [B, d].
Var mean_axis1(Tape& tape, const Var& a);

/// [B, C, H, W] -> [B, (H/p)*(W/p), C*p*p]; tokens row-major over the patch
/// grid, features ordered (c, dy, dx).
Var patchify(Tape& tape, const Var& a, std::size_t patch);

/// Smoothed row normalization over the last axis:
/// out_ij = (s_ij + eps/n) / (sum_j s_ij + eps). Rows sum to one and
/// all-zero rows become uniform.
Var row_normalize(Tape& tape, const Var& a, double eps);

/// Mean softmax cross-entropy of [B, C] logits against class indices.
Var softmax_cross_entropy(Tape& tape, const Var& logits, std::span<const std::size_t> labels);

/// Mean of squared elementwise differences; gradient flows to `a` only.
Var mean_squared_error(Tape& tape, const Var& a, const Tensor& target);

}  // namespace egsf
