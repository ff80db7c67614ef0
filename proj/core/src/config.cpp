// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include "egsf/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <type_traits>

#include "egsf/errors.hpp"
#include "json.hpp"

namespace egsf {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json to_json(const TrainConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["model"] = {{"image_size", c.model.image_size},
                {"in_channels", c.model.in_channels},
                {"stem_channels", c.model.stem_channels},
                {"kernel_size", c.model.kernel_size},
                {"conv_blocks", c.model.conv_blocks},
                {"patch_size", c.model.patch_size},
                {"token_dim", c.model.token_dim},
                {"attention_blocks", c.model.attention_blocks},
                {"num_classes", c.model.num_classes},
                {"timesteps", c.model.timesteps}};
  j["lif"] = {{"v_threshold", c.lif.v_threshold},
              {"v_reset", c.lif.v_reset},
              {"leak", c.lif.leak},
              {"surrogate_width", c.lif.surrogate_width}};
  j["gaze"] = {{"alpha", c.gaze.alpha},         {"lambda_loss", c.gaze.lambda_loss},
               {"enable_gm", c.gaze.enable_gm}, {"enable_alh", c.gaze.enable_alh},
               {"gm_at_test", c.gaze.gm_at_test}, {"sigma", c.gaze.sigma}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"momentum", c.train.momentum},
                {"grad_clip", c.train.grad_clip},
                {"eval_every", c.train.eval_every}};
  j["data"] = {{"dir", c.data_dir},
               {"train_size", c.data.train_size},
               {"test_size", c.data.test_size},
               {"positive_fraction", c.data.positive_fraction},
               {"rho_train", c.data.rho_train},
               {"rho_test", c.data.rho_test},
               {"background", c.data.background},
               {"noise_amplitude", c.data.noise_amplitude},
               {"noise_sigma", c.data.noise_sigma},
               {"lesion_amplitude", c.data.lesion_amplitude},
               {"lesion_sigma", c.data.lesion_sigma},
               {"tag_value", c.data.tag_value},
               {"tag_size", c.data.tag_size}};
  j["output"] = {{"dir", c.output.dir}, {"metrics_csv", c.output.metrics_csv}};
  j["profile"] = {{"calibration_samples", c.profile.calibration_samples},
                  {"e_mac", c.profile.e_mac},
                  {"e_ac", c.profile.e_ac}};
  j["ablate"] = {{"seeds", c.ablate.seeds}, {"timesteps", c.ablate.timesteps}};
  return j;
}

template <typename T>
void get(const json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
    if (!j.at(key).is_number_unsigned()) {
      throw ConfigError("config key '" + path + key + "' must be a nonnegative integer");
    }
  }
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + path + key + "' has the wrong type");
  }
}

void reject_unknown(const json& j, const ordered_json& reference, const std::string& path) {
  if (!j.is_object()) throw ConfigError("config section '" + path + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!reference.contains(it.key())) {
      throw ConfigError("unknown config key '" + path + it.key() + "'");
    }
    if (reference.at(it.key()).is_object()) {
      reject_unknown(it.value(), reference.at(it.key()), path + it.key() + ".");
    }
  }
}

TrainConfig from_json(const json& j) {
  const ordered_json reference = to_json(TrainConfig{});
  reject_unknown(j, reference, "");
  TrainConfig c;
  get(j, "seed", c.seed, "");
  auto section = [&](const char* name) -> const json& {
    static const json empty = json::object();
    return j.contains(name) ? j.at(name) : empty;
  };
  const json& m = section("model");
  get(m, "image_size", c.model.image_size, "model.");
  get(m, "in_channels", c.model.in_channels, "model.");
  get(m, "stem_channels", c.model.stem_channels, "model.");
  get(m, "kernel_size", c.model.kernel_size, "model.");
  get(m, "conv_blocks", c.model.conv_blocks, "model.");
  get(m, "patch_size", c.model.patch_size, "model.");
  get(m, "token_dim", c.model.token_dim, "model.");
  get(m, "attention_blocks", c.model.attention_blocks, "model.");
  get(m, "num_classes", c.model.num_classes, "model.");
  get(m, "timesteps", c.model.timesteps, "model.");
  const json& l = section("lif");
  get(l, "v_threshold", c.lif.v_threshold, "lif.");
  get(l, "v_reset", c.lif.v_reset, "lif.");
  get(l, "leak", c.lif.leak, "lif.");
  get(l, "surrogate_width", c.lif.surrogate_width, "lif.");
  const json& g = section("gaze");
  get(g, "alpha", c.gaze.alpha, "gaze.");
  get(g, "lambda_loss", c.gaze.lambda_loss, "gaze.");
  get(g, "enable_gm", c.gaze.enable_gm, "gaze.");
  get(g, "enable_alh", c.gaze.enable_alh, "gaze.");
  get(g, "gm_at_test", c.gaze.gm_at_test, "gaze.");
  get(g, "sigma", c.gaze.sigma, "gaze.");
  const json& t = section("train");
  get(t, "epochs", c.train.epochs, "train.");
  get(t, "batch_size", c.train.batch_size, "train.");
  get(t, "learning_rate", c.train.learning_rate, "train.");
  get(t, "momentum", c.train.momentum, "train.");
  get(t, "grad_clip", c.train.grad_clip, "train.");
  get(t, "eval_every", c.train.eval_every, "train.");
  const json& d = section("data");
  get(d, "dir", c.data_dir, "data.");
  get(d, "train_size", c.data.train_size, "data.");
  get(d, "test_size", c.data.test_size, "data.");
  get(d, "positive_fraction", c.data.positive_fraction, "data.");
  get(d, "rho_train", c.data.rho_train, "data.");
  get(d, "rho_test", c.data.rho_test, "data.");
  get(d, "background", c.data.background, "data.");
  get(d, "noise_amplitude", c.data.noise_amplitude, "data.");
  get(d, "noise_sigma", c.data.noise_sigma, "data.");
  get(d, "lesion_amplitude", c.data.lesion_amplitude, "data.");
  get(d, "lesion_sigma", c.data.lesion_sigma, "data.");
  get(d, "tag_value", c.data.tag_value, "data.");
  get(d, "tag_size", c.data.tag_size, "data.");
  const json& o = section("output");
  get(o, "dir", c.output.dir, "output.");
  get(o, "metrics_csv", c.output.metrics_csv, "output.");
  const json& p = section("profile");
  get(p, "calibration_samples", c.profile.calibration_samples, "profile.");
  get(p, "e_mac", c.profile.e_mac, "profile.");
  get(p, "e_ac", c.profile.e_ac, "profile.");
  const json& a = section("ablate");
  get(a, "seeds", c.ablate.seeds, "ablate.");
  get(a, "timesteps", c.ablate.timesteps, "ablate.");
  c.data.image_size = c.model.image_size;
  return c;
}

void collect_keys(const ordered_json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.value().is_object()) {
      collect_keys(it.value(), prefix + it.key() + ".", out);
    } else {
      out.push_back(prefix + it.key());
    }
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

ordered_json parse_scalar(const ordered_json& like, const std::string& key, const std::string& text) {
  auto fail = [&]() -> ordered_json {
    throw ConfigError("bad value '" + text + "' for config key '" + key + "'");
  };
  if (like.is_boolean()) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    return fail();
  }
  if (like.is_number_unsigned() || like.is_number_integer()) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size()) return fail();
    return v;
  }
  if (like.is_number_float()) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size()) return fail();
    return v;
  }
  if (like.is_string()) return text;
  return fail();
}

}  // namespace

void TrainConfig::validate() const {
  auto wrap = [](auto&& fn) {
    try {
      fn();
    } catch (const ContractError& e) {
      throw ConfigError(e.what());
    }
  };
  wrap([&] { model.validate(); });
  wrap([&] { lif.validate(); });
  wrap([&] { data.validate(); });
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(data.image_size == model.image_size, "data image size must equal model.image_size");
  require(model.in_channels == 1, "model.in_channels must be 1 for the synthetic benchmark");
  require(model.num_classes == 2, "model.num_classes must be 2 for the synthetic benchmark");
  require(gaze.alpha >= 0.0, "gaze.alpha must be >= 0");
  require(gaze.lambda_loss >= 0.0, "gaze.lambda_loss must be >= 0");
  require(gaze.sigma > 0.0, "gaze.sigma must be positive");
  require(train.epochs >= 1, "train.epochs must be at least 1");
  require(train.batch_size >= 1, "train.batch_size must be at least 1");
  require(train.learning_rate >= 0.0, "train.learning_rate must be >= 0");
  require(train.momentum >= 0.0 && train.momentum < 1.0, "train.momentum must lie in [0, 1)");
  require(train.grad_clip >= 0.0, "train.grad_clip must be >= 0");
  require(train.eval_every >= 1, "train.eval_every must be at least 1");
  require(!output.dir.empty(), "output.dir must not be empty");
  require(profile.calibration_samples >= 1, "profile.calibration_samples must be at least 1");
  require(profile.e_mac > 0.0 && profile.e_ac > 0.0, "profile energies must be positive");
  require(!ablate.seeds.empty(), "ablate.seeds must not be empty");
  require(!ablate.timesteps.empty(), "ablate.timesteps must not be empty");
  for (std::size_t t : ablate.timesteps) require(t >= 1, "ablate.timesteps entries must be >= 1");
}

std::string config_to_text(const TrainConfig& config) { return to_json(config).dump(2) + "\n"; }

TrainConfig config_from_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  TrainConfig c = from_json(j);
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_text(ss.str());
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  collect_keys(to_json(TrainConfig{}), "", keys);
  return keys;
}

std::string resolve_config_key(const std::string& key) {
  const auto keys = config_keys();
  std::vector<std::string> hits;
  for (const auto& k : keys) {
    if (k == key) return k;
    const auto dot = k.rfind('.');
    if (dot != std::string::npos && k.compare(dot + 1, std::string::npos, key) == 0) {
      hits.push_back(k);
    }
  }
  if (hits.size() == 1) return hits.front();
  if (hits.empty()) throw ConfigError("unknown config key '" + key + "'");
  std::string msg = "ambiguous config key '" + key + "', use one of:";
  for (const auto& h : hits) msg += " " + h;
  throw ConfigError(msg);
}

void apply_override(TrainConfig& config, const std::string& key, const std::string& value) {
  const std::string path = resolve_config_key(key);
  ordered_json j = to_json(config);
  ordered_json* node = &j;
  for (const auto& part : split(path, '.')) node = &(*node)[part];
  if (node->is_array()) {
    const ordered_json like = ordered_json(std::uint64_t{0});
    ordered_json arr = ordered_json::array();
    for (const auto& item : split(value, ',')) arr.push_back(parse_scalar(like, path, item));
    *node = std::move(arr);
  } else {
    *node = parse_scalar(*node, path, value);
  }
  config = from_json(j);
}

}  // namespace egsf
