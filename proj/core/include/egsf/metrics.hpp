// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "egsf/tensor.hpp"

namespace egsf {

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels);

/// ROC AUC of `scores` for class 1 via the Mann-Whitney U statistic with
/// midranks for ties. Empty when only one class is present.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const std::size_t> labels);

/// Binary F1 of the positive class; 0 when there are no true positives.
double f1_score(std::span<const std::size_t> predicted, std::span<const std::size_t> labels,
                std::size_t positive = 1);

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double dynamic_range = 1.0;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM over every valid (unpadded) Gaussian window of two [h, w]
/// maps. Throws DimensionError when the shapes differ or the window does
/// not fit.
double ssim(const Tensor& a, const Tensor& b, const SsimOptions& options = {});

/// Largest odd window no bigger than `preferred` that fits an h x w map.
std::size_t fitting_ssim_window(std::size_t h, std::size_t w, std::size_t preferred = 11);

/// Attention received per token (column sums of an [N, N] map), normalized
/// to sum 1 and laid out on the g x g patch grid.
Tensor attention_grid(const Tensor& attention, std::size_t grid);

/// Rescales a nonnegative map so its maximum is 1 (a zero map stays zero).
Tensor peak_normalized(const Tensor& map);

}  // namespace egsf
