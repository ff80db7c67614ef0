// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include "egsf_tools/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include "egsf/checkpoint.hpp"
#include "egsf/config.hpp"
#include "egsf/energy.hpp"
#include "egsf/errors.hpp"
#include "egsf/trainer.hpp"
#include "json.hpp"

namespace egsf::tools {
namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  bool json = false;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::string emit_csv;
  std::string split = "test";
};

// Builds the effective config: file (or defaults), then --key value
// overrides in command-line order. Returns the keys that were overridden.
std::vector<std::string> build_config(const Common& c, const std::vector<std::string>& extras,
                                      TrainConfig& config) {
  config = c.config_path.empty() ? TrainConfig{} : load_config(c.config_path);
  std::vector<std::string> touched;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    std::string tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.size() <= 2) {
      throw UsageError("unexpected argument '" + tok + "'");
    }
    tok.erase(0, 2);
    std::string value;
    if (const auto eq = tok.find('='); eq != std::string::npos) {
      value = tok.substr(eq + 1);
      tok.resize(eq);
    } else {
      if (i + 1 >= extras.size()) throw UsageError("flag --" + tok + " needs a value");
      value = extras[++i];
    }
    std::replace(tok.begin(), tok.end(), '-', '_');
    std::string key;
    try {
      key = resolve_config_key(tok);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
    apply_override(config, key, value);
    touched.push_back(key);
  }
  if (!c.data.empty()) config.data_dir = c.data;
  config.validate();
  return touched;
}

bool touched_key(const std::vector<std::string>& keys, const std::string& k) {
  return std::find(keys.begin(), keys.end(), k) != keys.end();
}

nlohmann::ordered_json eval_json(const EvalMetrics& m) {
  nlohmann::ordered_json j;
  j["samples"] = m.samples;
  j["accuracy"] = m.accuracy;
  j["auc"] = m.auc ? nlohmann::ordered_json(*m.auc) : nlohmann::ordered_json(nullptr);
  j["f1"] = m.f1;
  j["ssim"] = m.ssim;
  j["cls_loss"] = m.cls_loss;
  return j;
}

void print_eval(std::ostream& os, const EvalMetrics& m) {
  os << std::fixed << std::setprecision(4) << "samples " << m.samples << "  acc " << m.accuracy
     << "  auc ";
  if (m.auc) os << *m.auc;
  else os << "n/a";
  os << "  f1 " << m.f1 << "  ssim " << m.ssim << "  loss " << m.cls_loss << '\n';
  os.unsetf(std::ios::floatfield);
}

int cmd_gen_data(const Common& c, const std::vector<std::string>& extras, std::ostream& out) {
  TrainConfig config;
  build_config(c, extras, config);
  if (c.out.empty()) throw UsageError("gen-data requires --out <dir>");
  const Dataset d = generate_dataset(config.data, config.seed);
  write_dataset(d, c.out);
  if (c.json) {
    nlohmann::ordered_json j{{"dir", c.out},
                             {"seed", config.seed},
                             {"train", d.train.size()},
                             {"test", d.test.size()},
                             {"train_tag_correlation", tag_label_correlation(d.train)},
                             {"test_tag_correlation", tag_label_correlation(d.test)}};
    out << j.dump() << '\n';
  } else {
    out << "wrote " << d.train.size() << " train and " << d.test.size() << " test samples to "
        << c.out << " (seed " << config.seed << ")\n";
  }
  return kExitOk;
}

int cmd_train(const Common& c, const std::vector<std::string>& extras, std::ostream& out,
              std::ostream& err) {
  TrainConfig config;
  build_config(c, extras, config);
  if (!c.out.empty()) config.output.dir = c.out;
  auto progress = [&](const MetricsRow& row) {
    err << "epoch " << row.epoch << "/" << config.train.epochs << "  loss " << row.total_loss
        << " (cls " << row.cls_loss << ", align " << row.align_loss << ")";
    if (row.test) {
      err << "  test acc " << row.test->accuracy << " ssim " << row.test->ssim;
    }
    err << "  " << std::fixed << std::setprecision(1) << row.wall_time_s << "s\n";
    err.unsetf(std::ios::floatfield);
    err << std::setprecision(6);
  };
  TrainResult r = run_training(config, progress);
  const RunPaths paths = run_paths(config);
  if (c.json) {
    nlohmann::ordered_json j;
    j["checkpoint"] = paths.checkpoint.string();
    j["metrics"] = paths.metrics.string();
    j["epochs"] = r.rows.size();
    j["final"] = nlohmann::ordered_json::parse(metrics_json(r.rows.back()));
    out << j.dump() << '\n';
  } else {
    out << "checkpoint " << paths.checkpoint.string() << "\nmetrics " << paths.metrics.string()
        << '\n';
    print_eval(out, *r.rows.back().test);
  }
  return kExitOk;
}

EgSpikeFormer model_for(const Common& c, const TrainConfig& config,
                        const std::vector<std::string>& touched, std::size_t& timesteps) {
  if (c.checkpoint.empty()) {
    timesteps = config.model.timesteps;
    return EgSpikeFormer(config.model, config.lif, config.seed);
  }
  EgSpikeFormer model = load_model(c.checkpoint);
  timesteps = touched_key(touched, "model.timesteps") ? config.model.timesteps
                                                      : model.config().timesteps;
  if (model.config().image_size != config.model.image_size) {
    throw ConfigError("checkpoint image size " + std::to_string(model.config().image_size) +
                      " does not match model.image_size " +
                      std::to_string(config.model.image_size));
  }
  return model;
}

int cmd_eval(const Common& c, const std::vector<std::string>& extras, std::ostream& out) {
  TrainConfig config;
  const auto touched = build_config(c, extras, config);
  if (c.checkpoint.empty()) throw UsageError("eval requires --checkpoint <file>");
  if (c.split != "train" && c.split != "test") throw UsageError("--split must be train or test");
  std::size_t T = 0;
  const EgSpikeFormer model = model_for(c, config, touched, T);
  const Dataset data = load_or_generate(config);
  const bool gm = config.gaze.enable_gm && (c.split == "train" || config.gaze.gm_at_test);
  const PreparedSplit split = prepare_split(c.split == "train" ? data.train : data.test, config,
                                            gm ? config.gaze.alpha : 0.0);
  const EvalMetrics m = evaluate(model, split, T);
  if (c.json) {
    auto j = eval_json(m);
    j["split"] = c.split;
    j["timesteps"] = T;
    out << j.dump() << '\n';
  } else {
    out << c.split << " split, T=" << T << '\n';
    print_eval(out, m);
  }
  return kExitOk;
}

int cmd_profile(const Common& c, const std::vector<std::string>& extras, std::ostream& out) {
  TrainConfig config;
  const auto touched = build_config(c, extras, config);
  std::size_t T = 0;
  const EgSpikeFormer model = model_for(c, config, touched, T);
  const Dataset data = load_or_generate(config);
  const bool gm = config.gaze.enable_gm && config.gaze.gm_at_test;
  const PreparedSplit split = prepare_split(data.test, config, gm ? config.gaze.alpha : 0.0);
  const std::size_t n = std::min(config.profile.calibration_samples, split.size());
  const Shape& s = split.images.shape();
  Tensor batch({n, s[1], s[2], s[3]});
  std::copy_n(split.images.data().begin(), batch.numel(), batch.data().begin());
  const EnergyReport report =
      profile_model(model, batch, T, {config.profile.e_mac, config.profile.e_ac});
  if (c.json) {
    out << report_json(report) << '\n';
  } else {
    print_report_table(out, report);
  }
  if (!c.emit_csv.empty()) {
    std::ofstream csv(c.emit_csv, std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + c.emit_csv);
    write_report_csv(csv, report);
  }
  return kExitOk;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_ablate(const Common& c, const std::vector<std::string>& extras, std::ostream& out,
               std::ostream& err) {
  TrainConfig config;
  build_config(c, extras, config);
  if (!c.out.empty()) config.output.dir = c.out;
  std::filesystem::create_directories(config.output.dir);
  const auto path = std::filesystem::path(config.output.dir) / "ablation.jsonl";
  std::ofstream log(path, std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write " + path.string());
  auto on_row = [&](const AblationRow& r) {
    const std::string line = ablation_json(r);
    log << line << '\n' << std::flush;
    if (c.json) out << line << '\n';
    err << "seed " << r.seed << " T=" << r.timesteps << (r.gm ? " +GM" : " -GM")
        << (r.alh ? " +ALH" : " -ALH") << "  acc " << r.test.accuracy << "  ssim " << r.test.ssim
        << '\n';
  };
  const auto rows = run_ablation(config, on_row);
  if (!c.json) {
    out << std::left << std::setw(4) << "T" << std::setw(5) << "GM" << std::setw(5) << "ALH"
        << std::right << std::setw(12) << "median acc" << std::setw(12) << "median ssim" << '\n';
    for (std::size_t t : config.ablate.timesteps) {
      for (bool gm : {true, false}) {
        for (bool alh : {true, false}) {
          std::vector<double> acc, ss;
          for (const auto& r : rows) {
            if (r.timesteps == t && r.gm == gm && r.alh == alh) {
              acc.push_back(r.test.accuracy);
              ss.push_back(r.test.ssim);
            }
          }
          out << std::left << std::setw(4) << t << std::setw(5) << (gm ? "yes" : "no")
              << std::setw(5) << (alh ? "yes" : "no") << std::right << std::fixed
              << std::setprecision(4) << std::setw(12) << median(acc) << std::setw(12)
              << median(ss) << '\n';
          out.unsetf(std::ios::floatfield);
        }
      }
    }
    out << "rows: " << path.string() << '\n';
  }
  return kExitOk;
}

}  // namespace

int cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"egsf: gaze-guided spiking transformer toolkit", "egsf"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON config file");
    sub->add_flag("--json", common.json, "machine-readable output");
    sub->allow_extras();
    sub->footer("Any config key can be overridden with --<key> <value>, e.g. --model.timesteps 2 "
                "or --learning_rate 0.01. See docs/config.md.");
  };
  auto* gen = app.add_subcommand("gen-data", "write the synthetic dataset to a directory");
  add_common(gen);
  gen->add_option("--out", common.out, "dataset directory")->required();

  auto* train = app.add_subcommand("train", "train a model and write metrics and a checkpoint");
  add_common(train);
  train->add_option("--out", common.out, "run directory (output.dir)");
  train->add_option("--data", common.data, "dataset directory (data.dir)");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint", common.checkpoint, "checkpoint file")->required();
  eval->add_option("--data", common.data, "dataset directory (data.dir)");
  eval->add_option("--split", common.split, "train or test");

  auto* profile = app.add_subcommand("profile", "estimate inference energy");
  add_common(profile);
  profile->add_option("--checkpoint", common.checkpoint, "checkpoint file (default: fresh model)");
  profile->add_option("--data", common.data, "dataset directory (data.dir)");
  profile->add_option("--emit-csv", common.emit_csv, "write per-layer rows to this CSV file");

  auto* ablate = app.add_subcommand("ablate", "run the GM x ALH x timesteps grid over seeds");
  add_common(ablate);
  ablate->add_option("--out", common.out, "directory for ablation.jsonl (output.dir)");
  ablate->add_option("--data", common.data, "dataset directory (data.dir)");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }
  CLI::App* sub = app.get_subcommands().front();
  const std::vector<std::string> extras = sub->remaining();
  try {
    if (sub == gen) return cmd_gen_data(common, extras, out);
    if (sub == train) return cmd_train(common, extras, out, err);
    if (sub == eval) return cmd_eval(common, extras, out);
    if (sub == profile) return cmd_profile(common, extras, out);
    return cmd_ablate(common, extras, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << sub->help();
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace egsf::tools
