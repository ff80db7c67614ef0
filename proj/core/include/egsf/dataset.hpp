// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "egsf/gaze.hpp"
#include "egsf/tensor.hpp"

namespace egsf {

/// Synthetic shortcut benchmark. A positive image carries one Gaussian
/// lesion; a bright corner tag tracks the label with correlation rho_train
/// in the train split and rho_test in the test split.
struct DatasetConfig {
  std::size_t image_size = 32;
  std::size_t train_size = 2000;
  std::size_t test_size = 500;
  double positive_fraction = 0.5;
  double rho_train = 0.95;
  double rho_test = 0.0;
  double background = 0.35;       ///< mean background intensity
  double noise_amplitude = 0.08;  ///< std of the smoothed background noise
  double noise_sigma = 1.5;       ///< smoothing width of the background noise, pixels
  double lesion_amplitude = 0.2;
  double lesion_sigma = 2.0;      ///< pixels
  double tag_value = 1.0;
  std::size_t tag_size = 3;

  void validate() const;
};

struct SyntheticSample {
  std::string image_id;
  Tensor image;  ///< [1, H, W], values in [0,1] on the 16-bit grid
  std::size_t label = 0;
  bool shortcut_tag = false;
  GazeRecord gaze;
  /// Lesion centre (column, row); meaningful for positives only.
  double lesion_x = 0.0;
  double lesion_y = 0.0;
};

struct Dataset {
  DatasetConfig config;
  std::uint64_t seed = 0;
  std::vector<SyntheticSample> train;
  std::vector<SyntheticSample> test;
};

/// Deterministic in (config, seed). Every sample draws from its own
/// sub-seed, so generation order does not matter.
Dataset generate_dataset(const DatasetConfig& config, std::uint64_t seed);

/// Exact-count label and tag assignment for one split: the number of
/// positives is round(n * positive_fraction) and round(n_c * (1 - rho) / 2)
/// samples of each class have their tag flipped.
struct SplitLayout {
  std::vector<std::size_t> labels;
  std::vector<bool> tags;
};
SplitLayout split_layout(std::size_t n, double positive_fraction, double rho, std::uint64_t seed);

/// Pearson (phi) correlation between binary tags and labels.
double tag_label_correlation(const std::vector<SyntheticSample>& split);

/// Directory layout: images/<id>.pgm, labels.csv (image_id,label,shortcut_tag),
/// gaze.csv, manifest.json. Ids are train_NNNNN and test_NNNNN.
void write_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace egsf
