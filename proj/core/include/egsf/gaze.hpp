// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "egsf/ops.hpp"

namespace egsf {

struct Fixation {
  double x = 0.0;            ///< pixel column
  double y = 0.0;            ///< pixel row
  double duration_ms = 0.0;  ///< >= 0
};

struct GazeRecord {
  std::string image_id;
  std::vector<Fixation> fixations;
};

/// Duration-weighted sum of isotropic Gaussians, one per fixation, peak
/// normalized so the maximum is exactly 1. Fixations are clamped into the
/// image first. An empty record gives an all-zero [H, W] map. When every
/// duration is zero the fixations are weighted equally.
Tensor heatmap_from_fixations(const GazeRecord& record, double sigma, std::size_t height,
                              std::size_t width);

/// I * (1 + alpha * M) with the [H, W] mask broadcast over channels of a
/// [C, H, W] or [B, C, H, W] image (for the batched form `mask` is
/// [B, H, W]). With `clip` the result is clamped back to [0, 1].
Tensor apply_gaze_mask(const Tensor& image, const Tensor& mask, double alpha, bool clip = true);

/// Gaze mass per patch, row-major over the patch grid, normalized to sum 1
/// (uniform when the mask is empty). Length N = (H/p)*(W/p).
std::vector<double> gaze_patch_distribution(const Tensor& mask, std::size_t patch);

/// [N, N] target attention: every row is gaze_patch_distribution(mask).
Tensor gaze_token_attention(const Tensor& mask, std::size_t patch);

/// (1/N^2) sum_ij (a_t - a_g)^2. Batched [B, N, N] inputs average over B as
/// well. Differentiable in a_t.
Var alignment_loss(Tape& tape, const Var& a_t, const Tensor& a_g);
double alignment_loss(const Tensor& a_t, const Tensor& a_g);

/// cls + lambda * align.
Var total_loss(Tape& tape, const Var& cls_loss, const Var& align_loss, double lambda);
double total_loss(double cls_loss, double align_loss, double lambda);

/// Reads `image_id,x,y,duration_ms` rows (header required). Records keep
/// first-appearance order and fixations keep file order.
std::vector<GazeRecord> read_gaze_csv(const std::filesystem::path& path);
void write_gaze_csv(const std::filesystem::path& path, const std::vector<GazeRecord>& records);

/// 16-bit PGM dump of a mask for visual inspection.
void export_mask_pgm(const std::filesystem::path& path, const Tensor& mask);

}  // namespace egsf
