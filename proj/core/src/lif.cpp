// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include "egsf/lif.hpp"

#include <cmath>
#include <utility>
#include <vector>

#include "egsf/errors.hpp"

namespace egsf {

void LifParams::validate() const {
  if (!(leak >= 0.0 && leak <= 1.0)) throw ContractError("LifParams: leak must lie in [0,1]");
  if (!(v_threshold > v_reset)) throw ContractError("LifParams: v_threshold must exceed v_reset");
  if (!(surrogate_width > 0.0)) throw ContractError("LifParams: surrogate_width must be positive");
}

std::pair<Tensor, LifState> lif_step(const LifState& state, const Tensor& input_current,
                                     const LifParams& params) {
  if (state.membrane.shape() != input_current.shape()) {
    throw DimensionError("lif_step: membrane " + shape_string(state.membrane.shape()) +
                         " vs input " + shape_string(input_current.shape()));
  }
  Tensor spikes(input_current.shape());
  LifState next{Tensor(input_current.shape())};
  const double keep = 1.0 - params.leak;
  for (std::size_t i = 0; i < spikes.numel(); ++i) {
    const double v_s = state.membrane[i] + input_current[i];
    const bool fire = v_s >= params.v_threshold;
    spikes[i] = fire ? 1.0 : 0.0;
    next.membrane[i] = fire ? params.v_reset : keep * v_s;
  }
  return {std::move(spikes), std::move(next)};
}

Tensor lif_sequence(const Tensor& inputs, const LifParams& params,
                    const std::optional<LifState>& initial) {
  if (inputs.rank() == 0 || inputs.dim(0) == 0) {
    throw ContractError("lif_sequence: need at least one timestep");
  }
  const std::size_t T = inputs.dim(0);
  Shape slice_shape(inputs.shape().begin() + 1, inputs.shape().end());
  const std::size_t n = shape_numel(slice_shape);
  LifState state = initial ? *initial : LifState{Tensor(slice_shape)};
  if (state.membrane.shape() != slice_shape) {
    throw DimensionError("lif_sequence: initial membrane " + shape_string(state.membrane.shape()) +
                         " vs slice " + shape_string(slice_shape));
  }
  Tensor out(inputs.shape());
  Tensor current(slice_shape);
  for (std::size_t t = 0; t < T; ++t) {
    std::copy_n(inputs.data().begin() + static_cast<std::ptrdiff_t>(t * n), n, current.data().begin());
    auto [spikes, next] = lif_step(state, current, params);
    std::copy(spikes.data().begin(), spikes.data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(t * n));
    state = std::move(next);
  }
  return out;
}

double surrogate_derivative(double v_s, const LifParams& params) {
  const double w = params.surrogate_width;
  return std::max(0.0, 1.0 - std::abs(v_s - params.v_threshold) / w) / w;
}

Tensor surrogate_grad(const Tensor& v_s, const LifParams& params) {
  Tensor out(v_s.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = surrogate_derivative(v_s[i], params);
  return out;
}

double relaxed_spike(double v_s, const LifParams& params) {
  const double w = params.surrogate_width;
  const double u = v_s - params.v_threshold;
  if (u <= -w) return 0.0;
  if (u >= w) return 1.0;
  if (u <= 0.0) return (u + w) * (u + w) / (2.0 * w * w);
  return 1.0 - (w - u) * (w - u) / (2.0 * w * w);
}

Var spike_neuron(Tape& tape, const Var& input, std::size_t timesteps, const LifParams& params) {
  if (timesteps == 0 || input->rank() == 0 || input->dim(0) % timesteps != 0) {
    throw DimensionError("spike_neuron: leading extent of " + shape_string(input->shape()) +
                         " is not a multiple of T=" + std::to_string(timesteps));
  }
  const std::size_t T = timesteps;
  const std::size_t n = input->numel() / T;
  const bool relaxed = tape.spike_mode() == SpikeMode::kRelaxed;
  const double keep = 1.0 - params.leak;
  const bool record = tape.wants_grad({&input});

  Tensor spikes(input->shape());
  std::vector<double> v_s_hist(record ? input->numel() : 0);
  std::vector<double> membrane(n, 0.0);
  auto x = input->data();
  auto s = spikes.data();
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t off = t * n;
    for (std::size_t i = 0; i < n; ++i) {
      const double v_s = membrane[i] + x[off + i];
      double spike;
      if (relaxed) {
        spike = relaxed_spike(v_s, params);
      } else {
        spike = v_s >= params.v_threshold ? 1.0 : 0.0;
      }
      s[off + i] = spike;
      membrane[i] = spike * params.v_reset + (1.0 - spike) * keep * v_s;
      if (record) v_s_hist[off + i] = v_s;
    }
  }

  Var out = make_var(std::move(spikes), record);
  if (record) {
    tape.record([input, out, T, n, params, keep, v_s_hist = std::move(v_s_hist)] {
      if (!out->has_grad()) return;
      auto g = std::as_const(*out).grad();
      auto gx = input->grad();
      auto s = out->data();
      // g_mem: dL/dV_t flowing back from step t+1.
      std::vector<double> g_mem(n, 0.0);
      for (std::size_t step = T; step-- > 0;) {
        const std::size_t off = step * n;
        for (std::size_t i = 0; i < n; ++i) {
          const double v_s = v_s_hist[off + i];
          const double spike = s[off + i];
          const double g_spike = g[off + i] + g_mem[i] * (params.v_reset - keep * v_s);
          const double g_vs =
              g_spike * surrogate_derivative(v_s, params) + g_mem[i] * (1.0 - spike) * keep;
          gx[off + i] += g_vs;
          g_mem[i] = g_vs;
        }
      }
    });
  }
  return out;
}

}  // namespace egsf
