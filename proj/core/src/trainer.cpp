// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include "egsf/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "egsf/gaze.hpp"
#include "egsf/metrics.hpp"
#include "egsf/optim.hpp"
#include "egsf/rng.hpp"
#include "json.hpp"

namespace egsf {
namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566ULL;  // "shuf"
constexpr std::size_t kEvalBatch = 50;

Tensor gather_images(const PreparedSplit& split, std::span<const std::size_t> idx) {
  const Shape& s = split.images.shape();
  const std::size_t per = s[1] * s[2] * s[3];
  Tensor out({idx.size(), s[1], s[2], s[3]});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(split.images.data().begin() + static_cast<std::ptrdiff_t>(idx[i] * per), per,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return out;
}

Tensor gather_targets(const PreparedSplit& split, std::span<const std::size_t> idx) {
  const std::size_t n = split.gaze_tokens.front().size();
  Tensor out({idx.size(), n, n});
  double* p = out.data().data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& g = split.gaze_tokens[idx[i]];
    for (std::size_t r = 0; r < n; ++r, p += n) std::copy(g.begin(), g.end(), p);
  }
  return out;
}

double positive_probability(double l0, double l1) { return 1.0 / (1.0 + std::exp(l0 - l1)); }

nlohmann::ordered_json number_or_null(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

PreparedSplit prepare_split(const std::vector<SyntheticSample>& samples, const TrainConfig& config,
                            double alpha) {
  if (samples.empty()) throw ContractError("prepare_split: empty split");
  const std::size_t h = config.model.image_size, p = config.model.patch_size;
  const std::size_t grid = config.model.grid();
  PreparedSplit out;
  out.images = Tensor({samples.size(), 1, h, h});
  const std::size_t per = h * h;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.image.shape() != Shape{1, h, h}) {
      throw DimensionError("prepare_split: " + s.image_id + " has shape " +
                           shape_string(s.image.shape()));
    }
    const Tensor mask = heatmap_from_fixations(s.gaze, config.gaze.sigma, h, h);
    const Tensor enhanced = apply_gaze_mask(s.image, mask, alpha);
    std::copy(enhanced.data().begin(), enhanced.data().end(),
              out.images.data().begin() + static_cast<std::ptrdiff_t>(i * per));
    out.labels.push_back(s.label);
    auto g = gaze_patch_distribution(mask, p);
    out.gaze_grids.push_back(peak_normalized(Tensor({grid, grid}, g)));
    out.gaze_tokens.push_back(std::move(g));
  }
  return out;
}

Predictions predict(const EgSpikeFormer& model, const PreparedSplit& split,
                    std::size_t timesteps) {
  Predictions out;
  const std::size_t n = split.size();
  const std::size_t tokens = model.config().num_tokens();
  const std::size_t grid = model.config().grid();
  const std::size_t win = fitting_ssim_window(grid, grid);
  const SsimOptions opts{win, 1.5, 1.0, 0.01, 0.03};
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  double loss_sum = 0.0;
  for (std::size_t b0 = 0; b0 < n; b0 += kEvalBatch) {
    const std::size_t b1 = std::min(n, b0 + kEvalBatch);
    std::span<const std::size_t> batch(idx.data() + b0, b1 - b0);
    Tape tape(false);
    ModelOutput fwd = model.forward(tape, make_var(gather_images(split, batch)), false, timesteps);
    Var loss = softmax_cross_entropy(
        tape, fwd.logits, std::span<const std::size_t>(split.labels.data() + b0, batch.size()));
    loss_sum += loss->item() * static_cast<double>(batch.size());
    const std::size_t classes = fwd.logits->dim(1);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double* l = fwd.logits->data().data() + i * classes;
      out.scores.push_back(positive_probability(l[0], l[1]));
      out.predicted.push_back(static_cast<std::size_t>(std::max_element(l, l + classes) - l));
      Tensor a({tokens, tokens});
      std::copy_n(fwd.attention->data().begin() + static_cast<std::ptrdiff_t>(i * tokens * tokens),
                  tokens * tokens, a.data().begin());
      const Tensor att = peak_normalized(attention_grid(a, grid));
      out.ssim.push_back(ssim(att, split.gaze_grids[b0 + i], opts));
    }
  }
  out.cls_loss = loss_sum / static_cast<double>(n);
  return out;
}

EvalMetrics evaluate(const EgSpikeFormer& model, const PreparedSplit& split,
                     std::size_t timesteps) {
  const Predictions p = predict(model, split, timesteps);
  EvalMetrics m;
  m.samples = split.size();
  m.accuracy = accuracy(p.predicted, split.labels);
  m.auc = roc_auc(p.scores, split.labels);
  m.f1 = f1_score(p.predicted, split.labels);
  double s = 0.0;
  for (double v : p.ssim) s += v;
  m.ssim = s / static_cast<double>(p.ssim.size());
  m.cls_loss = p.cls_loss;
  return m;
}

std::string metrics_json(const MetricsRow& row) {
  nlohmann::ordered_json j;
  j["schema"] = kMetricsSchema;
  j["epoch"] = row.epoch;
  j["train"] = {{"samples", row.samples},
                {"cls_loss", row.cls_loss},
                {"align_loss", row.align_loss},
                {"total_loss", row.total_loss},
                {"lambda", row.lambda}};
  if (row.test) {
    const auto& t = *row.test;
    j["test"] = {{"samples", t.samples},       {"accuracy", t.accuracy},
                 {"auc", number_or_null(t.auc)}, {"f1", t.f1},
                 {"ssim", t.ssim},             {"ssim_mode", "per_image_mean"},
                 {"cls_loss", t.cls_loss}};
  } else {
    j["test"] = nullptr;
  }
  return j.dump();
}

std::string metrics_csv_header() {
  return "epoch,samples,cls_loss,align_loss,total_loss,accuracy,auc,f1,ssim";
}

std::string metrics_csv_row(const MetricsRow& row) {
  std::string s = std::to_string(row.epoch) + "," + std::to_string(row.samples) + "," +
                  fmt(row.cls_loss) + "," + fmt(row.align_loss) + "," + fmt(row.total_loss);
  if (row.test) {
    s += "," + fmt(row.test->accuracy) + "," + (row.test->auc ? fmt(*row.test->auc) : "") + "," +
         fmt(row.test->f1) + "," + fmt(row.test->ssim);
  } else {
    s += ",,,,";
  }
  return s;
}

TrainResult train_model(const TrainConfig& config, const Dataset& data,
                        const EpochCallback& on_epoch) {
  config.validate();
  const auto& tc = config.train;
  const double alpha = config.gaze.enable_gm ? config.gaze.alpha : 0.0;
  const double test_alpha = config.gaze.enable_gm && config.gaze.gm_at_test ? config.gaze.alpha : 0.0;
  const double lambda = config.gaze.enable_alh ? config.gaze.lambda_loss : 0.0;
  const PreparedSplit train = prepare_split(data.train, config, alpha);
  const PreparedSplit test = prepare_split(data.test, config, test_alpha);

  TrainResult result{EgSpikeFormer(config.model, config.lif, config.seed), {}};
  EgSpikeFormer& model = result.model;
  const auto params = model.parameters();
  SgdMomentum optim(params, tc.learning_rate, tc.momentum);
  const std::size_t T = config.model.timesteps;

  std::vector<std::size_t> order(train.size());
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(config.seed, kShuffleStream, epoch));
    shuffle_rng.shuffle(order);

    double cls_sum = 0.0, align_sum = 0.0, total_sum = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += tc.batch_size, ++step) {
      const std::size_t b1 = std::min(order.size(), b0 + tc.batch_size);
      std::span<const std::size_t> batch(order.data() + b0, b1 - b0);
      std::vector<std::size_t> labels(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = train.labels[batch[i]];

      const Checkpoint before = snapshot(model);
      auto diverged = [&](const std::string& why) {
        restore(model, before);
        return TrainingDiverged("training diverged at epoch " + std::to_string(epoch) +
                                    ", step " + std::to_string(step) + ": " + why,
                                before, epoch, step);
      };

      Tape tape;
      ModelOutput fwd = model.forward(tape, make_var(gather_images(train, batch)), true);
      Var cls = softmax_cross_entropy(tape, fwd.logits, labels);
      Var total = cls;
      double align_value = 0.0;
      if (config.gaze.enable_alh) {
        Var align = alignment_loss(tape, fwd.attention, gather_targets(train, batch));
        align_value = align->item();
        total = total_loss(tape, cls, align, lambda);
      }
      if (!std::isfinite(total->item())) {
        throw diverged("loss is " + std::to_string(total->item()) + " (cls " +
                       std::to_string(cls->item()) + ", align " + std::to_string(align_value) +
                       ")");
      }
      optim.zero_grad();
      tape.backward(total);
      try {
        if (tc.grad_clip > 0.0) clip_grad_norm(params, tc.grad_clip);
        optim.step();
      } catch (const NumericError& e) {
        throw diverged(e.what());
      }
      for (const auto& p : params) {
        if (!p.var->all_finite()) throw diverged("update left non-finite values in " + p.name);
      }
      // Momentum SGD moves every parameter; BN running statistics are
      // updated by the forward pass itself.
      const double w = static_cast<double>(batch.size());
      cls_sum += cls->item() * w;
      align_sum += align_value * w;
      total_sum += total->item() * w;
    }

    MetricsRow row;
    row.epoch = epoch;
    row.samples = train.size();
    const double n = static_cast<double>(train.size());
    row.cls_loss = cls_sum / n;
    row.align_loss = align_sum / n;
    row.total_loss = total_sum / n;
    row.lambda = lambda;
    if (epoch % tc.eval_every == 0 || epoch == tc.epochs) row.test = evaluate(model, test, T);
    row.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_epoch) on_epoch(row);
    result.rows.push_back(std::move(row));
  }
  return result;
}

Dataset load_or_generate(const TrainConfig& config) {
  if (config.data_dir.empty()) return generate_dataset(config.data, config.seed);
  Dataset d = read_dataset(config.data_dir);
  if (d.config.image_size != config.model.image_size) {
    throw ConfigError("dataset in " + config.data_dir + " has image size " +
                      std::to_string(d.config.image_size) + ", model expects " +
                      std::to_string(config.model.image_size));
  }
  return d;
}

RunPaths run_paths(const TrainConfig& config) {
  const std::filesystem::path dir(config.output.dir);
  RunPaths p{dir / "model.ckpt", dir / "metrics.jsonl", {}};
  if (config.output.metrics_csv) p.metrics_csv = dir / "metrics.csv";
  return p;
}

TrainResult run_training(const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const Dataset data = load_or_generate(config);
  const RunPaths paths = run_paths(config);
  std::filesystem::create_directories(config.output.dir);
  {
    std::ofstream cfg(std::filesystem::path(config.output.dir) / "config.json", std::ios::trunc);
    cfg << config_to_text(config);
  }
  std::ofstream log(paths.metrics, std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write " + paths.metrics.string());
  std::ofstream csv;
  if (!paths.metrics_csv.empty()) {
    csv.open(paths.metrics_csv, std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + paths.metrics_csv.string());
    csv << metrics_csv_header() << '\n';
  }
  auto sink = [&](const MetricsRow& row) {
    log << metrics_json(row) << '\n' << std::flush;
    if (csv.is_open()) csv << metrics_csv_row(row) << '\n' << std::flush;
    if (on_epoch) on_epoch(row);
  };
  try {
    TrainResult result = train_model(config, data, sink);
    save_checkpoint(result.model, paths.checkpoint);
    return result;
  } catch (const TrainingDiverged& e) {
    const auto bytes = encode_checkpoint(e.last_good);
    std::ofstream out(paths.checkpoint, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    throw;
  }
}

std::vector<AblationRow> run_ablation(const TrainConfig& base,
                                      const std::function<void(const AblationRow&)>& on_row) {
  base.validate();
  std::vector<AblationRow> rows;
  for (std::uint64_t seed : base.ablate.seeds) {
    TrainConfig seeded = base;
    seeded.seed = seed;
    const Dataset data = load_or_generate(seeded);
    for (std::size_t t : base.ablate.timesteps) {
      for (bool gm : {true, false}) {
        for (bool alh : {true, false}) {
          TrainConfig c = seeded;
          c.model.timesteps = t;
          c.gaze.enable_gm = gm;
          c.gaze.enable_alh = alh;
          c.train.eval_every = c.train.epochs;
          TrainResult r = train_model(c, data);
          AblationRow row{gm, alh, t, seed, *r.rows.back().test};
          if (on_row) on_row(row);
          rows.push_back(row);
        }
      }
    }
  }
  return rows;
}

std::string ablation_json(const AblationRow& row) {
  nlohmann::ordered_json j;
  j["schema"] = "egsf.ablation/1";
  j["seed"] = row.seed;
  j["timesteps"] = row.timesteps;
  j["gm"] = row.gm;
  j["alh"] = row.alh;
  j["accuracy"] = row.test.accuracy;
  j["auc"] = number_or_null(row.test.auc);
  j["f1"] = row.test.f1;
  j["ssim"] = row.test.ssim;
  return j.dump();
}

}  // namespace egsf
