// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include "egsf/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "egsf/rng.hpp"

namespace egsf {

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

std::vector<std::string> GradCheckReport::flagged() const {
  std::vector<std::string> names;
  for (const auto& e : entries) {
    if (!e.passed) names.push_back(e.name);
  }
  return names;
}

double relative_error(double a, double b, double abs_floor) {
  const double denom = std::max({std::abs(a), std::abs(b), abs_floor});
  return std::abs(a - b) / denom;
}

GradCheckReport grad_check(const LossClosure& loss, std::span<const NamedParam> params,
                           const GradCheckOptions& options) {
  for (const auto& p : params) p.var->zero_grad();
  {
    Tape tape(true, options.spike_mode);
    Var l = loss(tape);
    tape.backward(l);
  }
  std::vector<std::vector<double>> tape_grads;
  for (const auto& p : params) {
    if (p.var->has_grad()) {
      auto g = std::as_const(*p.var).grad();
      tape_grads.emplace_back(g.begin(), g.end());
    } else {
      tape_grads.emplace_back(p.var->numel(), 0.0);
    }
  }

  auto evaluate = [&] {
    Tape tape(false, options.spike_mode);
    return loss(tape)->item();
  };

  // Build the probe list.
  std::vector<std::pair<std::size_t, std::size_t>> probes;
  Rng rng(options.seed);
  if (options.total_probes > 0) {
    for (std::size_t i = 0; i < options.total_probes; ++i) {
      const std::size_t p = rng.below(params.size());
      probes.emplace_back(p, rng.below(params[p].var->numel()));
    }
  } else {
    for (std::size_t p = 0; p < params.size(); ++p) {
      const std::size_t n = params[p].var->numel();
      if (options.probes_per_param == 0 || options.probes_per_param >= n) {
        for (std::size_t i = 0; i < n; ++i) probes.emplace_back(p, i);
      } else {
        for (std::size_t i = 0; i < options.probes_per_param; ++i) probes.emplace_back(p, rng.below(n));
      }
    }
  }

  GradCheckReport report;
  report.tolerance = options.tolerance;
  report.entries.resize(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) report.entries[p].name = params[p].name;

  for (const auto& [p, i] : probes) {
    double& value = (*params[p].var)[i];
    const double original = value;
    value = original + options.step;
    const double up = evaluate();
    value = original - options.step;
    const double down = evaluate();
    value = original;
    const double numeric = (up - down) / (2.0 * options.step);
    const double analytic = tape_grads[p][i];
    const double err = relative_error(analytic, numeric, options.abs_floor);
    auto& entry = report.entries[p];
    ++entry.probes;
    if (err >= entry.max_rel_error) {
      entry.max_rel_error = err;
      entry.worst_index = i;
      entry.tape_grad = analytic;
      entry.numeric_grad = numeric;
    }
  }
  for (auto& e : report.entries) e.passed = !(e.max_rel_error > options.tolerance);
  // Leave the parameters with the gradients the tape produced.
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto g = params[p].var->grad();
    std::copy(tape_grads[p].begin(), tape_grads[p].end(), g.begin());
  }
  return report;
}

}  // namespace egsf
