// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <variant>

namespace egsf {

struct ConvLayerShape {
  std::size_t c_in = 0;
  std::size_t c_out = 0;
  std::size_t h_out = 0;
  std::size_t w_out = 0;
  std::size_t kernel = 1;
  std::size_t groups = 1;
};

/// [m x k] * [k x n]
struct MatmulLayerShape {
  std::size_t m = 0;
  std::size_t k = 0;
  std::size_t n = 0;
};

using LayerShape = std::variant<std::monostate, ConvLayerShape, MatmulLayerShape>;

/// What feeds a weighted layer. Static layers run once per sample (the
/// input image is identical at every timestep); dense layers see real
/// values every timestep; spike-fed layers only accumulate on spikes.
enum class LayerInput { kStatic, kDense, kSpikes };

/// Structural description of one weighted layer for operation counting.
struct LayerDescription {
  std::string name;
  LayerShape shape;
  LayerInput input = LayerInput::kDense;
  /// Name of the spiking layer whose output feeds this layer (kSpikes only).
  std::string spike_source;
};

}  // namespace egsf
