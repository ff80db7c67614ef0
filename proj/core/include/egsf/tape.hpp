// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "egsf/tensor.hpp"

namespace egsf {

/// How spiking nonlinearities evaluate in the forward pass.
///
/// kHard emits exact {0,1} spikes (the model). kRelaxed replaces the step by
/// the integral of the surrogate, a C1 ramp whose true derivative is the
/// surrogate; finite differences of a relaxed forward are the oracle for
/// surrogate gradients.
enum class SpikeMode { kHard, kRelaxed };

/// Reverse-mode tape. Lives for one forward+backward pass.
class Tape {
 public:
  explicit Tape(bool recording = true, SpikeMode mode = SpikeMode::kHard)
      : recording_(recording), spike_mode_(mode) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  SpikeMode spike_mode() const { return spike_mode_; }
  std::size_t size() const { return adjoints_.size(); }

  /// True when an op over these inputs must record an adjoint.
  bool wants_grad(std::initializer_list<const Var*> inputs) const;

  void record(std::function<void()> adjoint);

  /// Seeds d(loss)/d(loss) = 1, replays adjoints newest-first, then clears.
  /// Throws ContractError for a non-scalar loss or an empty tape (including
  /// a second call without a new forward pass).
  void backward(const Var& loss);

  void clear() { adjoints_.clear(); }

 private:
  bool recording_;
  SpikeMode spike_mode_;
  std::vector<std::function<void()>> adjoints_;
};

}  // namespace egsf
