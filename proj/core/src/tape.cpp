// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include "egsf/tape.hpp"

#include <algorithm>

#include "egsf/errors.hpp"

namespace egsf {

bool Tape::wants_grad(std::initializer_list<const Var*> inputs) const {
  if (!recording_) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Var* v) { return v != nullptr && *v && (*v)->requires_grad(); });
}

void Tape::record(std::function<void()> adjoint) {
  if (recording_) adjoints_.push_back(std::move(adjoint));
}

void Tape::backward(const Var& loss) {
  if (!loss || !loss->is_scalar()) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        (loss ? shape_string(loss->shape()) : std::string("<null>")));
  }
  if (adjoints_.empty()) {
    throw ContractError("backward on an empty tape: run a forward pass first");
  }
  auto seed = loss->grad();
  std::fill(seed.begin(), seed.end(), 1.0);
  for (auto it = adjoints_.rbegin(); it != adjoints_.rend(); ++it) (*it)();
  adjoints_.clear();
}

}  // namespace egsf
