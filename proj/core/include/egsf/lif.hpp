// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <utility>

#include "egsf/tape.hpp"
#include "egsf/tensor.hpp"

namespace egsf {

/// Leaky integrate-and-fire parameters.
struct LifParams {
  double v_threshold = 1.0;
  double v_reset = 0.0;
  double leak = 0.5;             ///< fraction of potential lost per silent step, in [0,1]
  double surrogate_width = 1.0;  ///< half-width of the triangular surrogate, > 0

  /// Throws ContractError when the invariants do not hold.
  void validate() const;
};

struct LifState {
  Tensor membrane;
};

/// One integrate-fire-reset update. The input is the already weighted
/// current; the neuron holds no synaptic weight of its own.
///
///   v_s   = v_prev + input
///   spike = v_s >= v_threshold
///   v     = spike ? v_reset : (1 - leak) * v_s
std::pair<Tensor, LifState> lif_step(const LifState& state, const Tensor& input_current,
                                     const LifParams& params);

/// Folds lif_step over the leading time axis of `inputs` ([T, ...]).
/// The initial membrane defaults to zeros.
Tensor lif_sequence(const Tensor& inputs, const LifParams& params,
                    const std::optional<LifState>& initial = std::nullopt);

/// Triangular surrogate for dS/dV_s: max(0, 1 - |v_s - v_th| / w) / w.
double surrogate_derivative(double v_s, const LifParams& params);
Tensor surrogate_grad(const Tensor& v_s, const LifParams& params);

/// Integral of the surrogate: a C1 ramp from 0 to 1 across
/// [v_th - w, v_th + w]. Used by SpikeMode::kRelaxed.
double relaxed_spike(double v_s, const LifParams& params);

/// Differentiable spiking layer over a time-major tensor [T*B, ...].
/// Membranes start at zero for every sample. Backward is BPTT through the
/// membrane recurrence (including the reset path) with the surrogate in
/// place of the step derivative.
Var spike_neuron(Tape& tape, const Var& input, std::size_t timesteps, const LifParams& params);

}  // namespace egsf
