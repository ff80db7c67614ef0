// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include "egsf/optim.hpp"

#include <cmath>

#include "egsf/errors.hpp"

namespace egsf {

void sgd_step(Tensor& param, std::span<const double> grad, std::vector<double>& velocity,
              double learning_rate, double momentum, const std::string& name) {
  if (grad.size() != param.numel()) {
    throw DimensionError("sgd_step: gradient for '" + name + "' has " +
                         std::to_string(grad.size()) + " elements, parameter " +
                         shape_string(param.shape()));
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericError("sgd_step: non-finite gradient " + std::to_string(grad[i]) + " in '" +
                         name + "' at element " + std::to_string(i));
    }
  }
  if (velocity.size() != grad.size()) velocity.assign(grad.size(), 0.0);
  auto p = param.data();
  for (std::size_t i = 0; i < grad.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grad[i];
    p[i] -= learning_rate * velocity[i];
  }
}

SgdMomentum::SgdMomentum(std::vector<NamedParam> params, double learning_rate, double momentum)
    : params_(std::move(params)),
      velocity_(params_.size()),
      learning_rate_(learning_rate),
      momentum_(momentum) {}

void SgdMomentum::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i].var;
    if (!p.has_grad()) p.grad();
    sgd_step(p, std::as_const(p).grad(), velocity_[i], learning_rate_, momentum_,
             params_[i].name);
  }
}

void SgdMomentum::zero_grad() {
  for (auto& p : params_) p.var->zero_grad();
}

double clip_grad_norm(std::span<const NamedParam> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.var->has_grad()) continue;
    for (double g : std::as_const(*p.var).grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm && std::isfinite(norm)) {
    const double factor = max_norm / norm;
    for (const auto& p : params) {
      if (!p.var->has_grad()) continue;
      for (double& g : p.var->grad()) g *= factor;
    }
  }
  return norm;
}

}  // namespace egsf
