// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "egsf/dataset.hpp"
#include "egsf/lif.hpp"
#include "egsf/model.hpp"

namespace egsf {

struct GazeConfig {
  double alpha = 0.5;        ///< gaze-mask gain
  double lambda_loss = 1.0;  ///< alignment loss weight
  bool enable_gm = true;
  bool enable_alh = true;
  bool gm_at_test = true;  ///< also enhance evaluation images when enable_gm
  double sigma = 4.0;      ///< fixation Gaussian width, pixels
};

struct OptimConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double grad_clip = 0.0;  ///< max global gradient norm, 0 disables
  std::size_t eval_every = 1;
};

struct OutputConfig {
  std::string dir = "runs/default";
  bool metrics_csv = false;
};

struct ProfileConfig {
  std::size_t calibration_samples = 64;
  double e_mac = 4.6;
  double e_ac = 0.9;
};

struct AblateConfig {
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<std::size_t> timesteps = {2, 4};
};

struct TrainConfig {
  std::uint64_t seed = 0;
  ModelConfig model;
  LifParams lif;
  GazeConfig gaze;
  OptimConfig train;
  DatasetConfig data;
  /// Dataset directory written by gen-data. Empty generates the dataset in
  /// memory from `data` and `seed`.
  std::string data_dir;
  OutputConfig output;
  ProfileConfig profile;
  AblateConfig ablate;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Serialized config (JSON, nested objects).
std::string config_to_text(const TrainConfig& config);
TrainConfig config_from_text(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);

/// Dotted key paths of every leaf, e.g. "model.timesteps".
std::vector<std::string> config_keys();

/// Resolves a dotted path or an unambiguous leaf name ("timesteps") to its
/// dotted path. Throws ConfigError for unknown or ambiguous keys.
std::string resolve_config_key(const std::string& key);

/// Sets one key from its textual value, typed by the key. Lists take comma
/// separated values. Throws ConfigError on unknown keys or bad values.
void apply_override(TrainConfig& config, const std::string& key, const std::string& value);

}  // namespace egsf
