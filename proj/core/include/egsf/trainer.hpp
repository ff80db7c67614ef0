// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "egsf/checkpoint.hpp"
#include "egsf/config.hpp"
#include "egsf/dataset.hpp"
#include "egsf/errors.hpp"

namespace egsf {

inline constexpr const char* kMetricsSchema = "egsf.metrics/1";

/// A split turned into model inputs: gaze-enhanced images plus the gaze
/// targets used by the alignment loss and by SSIM.
struct PreparedSplit {
  Tensor images;  ///< [n, 1, H, W]
  std::vector<std::size_t> labels;
  std::vector<std::vector<double>> gaze_tokens;  ///< per sample, length N, sums to 1
  std::vector<Tensor> gaze_grids;                ///< per sample, [g, g], peak 1
  std::size_t size() const { return labels.size(); }
};

/// Builds model inputs. The gaze mask is applied with gain `alpha`; passing
/// 0 leaves images untouched (I * (1 + 0 * M) = I).
PreparedSplit prepare_split(const std::vector<SyntheticSample>& samples, const TrainConfig& config,
                            double alpha);

struct EvalMetrics {
  std::size_t samples = 0;
  double accuracy = 0.0;
  std::optional<double> auc;  ///< absent for single-class splits
  double f1 = 0.0;
  double ssim = 0.0;  ///< mean per-image attention/gaze SSIM
  double cls_loss = 0.0;
};

struct Predictions {
  std::vector<double> scores;  ///< positive-class probability
  std::vector<std::size_t> predicted;
  std::vector<double> ssim;
  double cls_loss = 0.0;
};

Predictions predict(const EgSpikeFormer& model, const PreparedSplit& split, std::size_t timesteps);
EvalMetrics evaluate(const EgSpikeFormer& model, const PreparedSplit& split,
                     std::size_t timesteps);

struct MetricsRow {
  std::size_t epoch = 0;
  std::size_t samples = 0;
  double cls_loss = 0.0;
  double align_loss = 0.0;
  double total_loss = 0.0;
  double lambda = 0.0;
  std::optional<EvalMetrics> test;
  double wall_time_s = 0.0;  ///< console only, never written to the log
};

/// One JSON document, no trailing newline.
std::string metrics_json(const MetricsRow& row);
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);

/// Raised when a loss or gradient goes non-finite. Carries the parameters
/// from before the failing step.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, Checkpoint last_good, std::size_t epoch,
                   std::size_t step)
      : NumericError(what), last_good(std::move(last_good)), epoch(epoch), step(step) {}
  Checkpoint last_good;
  std::size_t epoch;
  std::size_t step;
};

struct TrainResult {
  EgSpikeFormer model;
  std::vector<MetricsRow> rows;
};

using EpochCallback = std::function<void(const MetricsRow&)>;

/// Trains on data.train, evaluating on data.test at the configured cadence
/// and always after the last epoch.
TrainResult train_model(const TrainConfig& config, const Dataset& data,
                        const EpochCallback& on_epoch = {});

/// Reads config.data_dir when set, otherwise generates from config.
Dataset load_or_generate(const TrainConfig& config);

struct RunPaths {
  std::filesystem::path checkpoint;
  std::filesystem::path metrics;
  std::filesystem::path metrics_csv;  ///< empty unless enabled
};
RunPaths run_paths(const TrainConfig& config);

/// Full `train` command: trains, streams metrics.jsonl (and metrics.csv),
/// writes model.ckpt and config.json under output.dir. On divergence the
/// last good parameters are written to model.ckpt before rethrowing.
TrainResult run_training(const TrainConfig& config, const EpochCallback& on_epoch = {});

struct AblationRow {
  bool gm = false;
  bool alh = false;
  std::size_t timesteps = 0;
  std::uint64_t seed = 0;
  EvalMetrics test;
};

/// Every {GM, no GM} x {ALH, no ALH} x ablate.timesteps cell for every
/// seed in ablate.seeds, in that nesting order (seed outermost).
std::vector<AblationRow> run_ablation(const TrainConfig& base,
                                      const std::function<void(const AblationRow&)>& on_row = {});

std::string ablation_json(const AblationRow& row);

}  // namespace egsf
