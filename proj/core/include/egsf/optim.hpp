// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "egsf/tensor.hpp"

namespace egsf {

struct NamedParam {
  std::string name;
  Var var;
};

/// One SGD-with-momentum update of a single tensor:
///   v <- momentum * v + g;  p <- p - lr * v
/// Throws NumericError when `grad` holds a non-finite value.
void sgd_step(Tensor& param, std::span<const double> grad, std::vector<double>& velocity,
              double learning_rate, double momentum, const std::string& name = "param");

/// Momentum SGD over a fixed parameter list; owns the velocity buffers.
class SgdMomentum {
 public:
  SgdMomentum(std::vector<NamedParam> params, double learning_rate, double momentum);

  /// Applies one update from the accumulated gradients. Parameters without a
  /// gradient buffer are treated as having zero gradient.
  void step();
  void zero_grad();

  double learning_rate() const { return learning_rate_; }
  double momentum() const { return momentum_; }

 private:
  std::vector<NamedParam> params_;
  std::vector<std::vector<double>> velocity_;
  double learning_rate_;
  double momentum_;
};

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping. max_norm <= 0 disables clipping.
double clip_grad_norm(std::span<const NamedParam> params, double max_norm);

}  // namespace egsf
