// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "egsf/optim.hpp"
#include "egsf/tape.hpp"

namespace egsf {

/// Builds a scalar loss on the given tape from the current parameter values.
using LossClosure = std::function<Var(Tape&)>;

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  /// Elements probed per parameter; 0 probes every element.
  std::size_t probes_per_param = 0;
  /// When nonzero, probe this many random (parameter, element) pairs in
  /// total instead of per-parameter probing.
  std::size_t total_probes = 0;
  std::uint64_t seed = 0;
  /// Spikes are relaxed by default so the finite differences see the
  /// function whose derivative the surrogate is.
  SpikeMode spike_mode = SpikeMode::kRelaxed;
  /// Denominator floor for relative errors on vanishing gradients.
  double abs_floor = 1e-6;
};

struct GradCheckEntry {
  std::string name;
  std::size_t probes = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double tape_grad = 0.0;
  double numeric_grad = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  double tolerance = 0.0;
  std::vector<GradCheckEntry> entries;

  bool passed() const;
  double max_rel_error() const;
  /// Names of parameters above tolerance.
  std::vector<std::string> flagged() const;
};

double relative_error(double a, double b, double abs_floor);

/// Compares tape gradients with central finite differences. Never throws on
/// a mismatch; the report carries the verdict.
GradCheckReport grad_check(const LossClosure& loss, std::span<const NamedParam> params,
                           const GradCheckOptions& options = {});

}  // namespace egsf
