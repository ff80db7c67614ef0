// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "egsf/config.hpp"
#include "egsf/errors.hpp"

namespace egsf {
namespace {

TEST(Config, DefaultsValidateAndRoundTrip) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  const std::string text = config_to_text(c);
  EXPECT_EQ(config_to_text(config_from_text(text)), text);
}

TEST(Config, NonDefaultValuesSurviveRoundTrip) {
  TrainConfig c;
  c.seed = 99;
  c.model.timesteps = 2;
  c.gaze.alpha = 0.125;
  c.gaze.enable_alh = false;
  c.train.learning_rate = 0.01;
  c.data.rho_train = 0.8;
  c.data_dir = "some/dir";
  c.ablate.seeds = {3, 5};
  TrainConfig back = config_from_text(config_to_text(c));
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.model.timesteps, 2u);
  EXPECT_EQ(back.gaze.alpha, 0.125);
  EXPECT_FALSE(back.gaze.enable_alh);
  EXPECT_EQ(back.train.learning_rate, 0.01);
  EXPECT_EQ(back.data.rho_train, 0.8);
  EXPECT_EQ(back.data_dir, "some/dir");
  EXPECT_EQ(back.ablate.seeds, (std::vector<std::uint64_t>{3, 5}));
}

TEST(Config, PartialDocumentKeepsDefaults) {
  TrainConfig c = config_from_text(R"({"model": {"timesteps": 2}})");
  EXPECT_EQ(c.model.timesteps, 2u);
  EXPECT_EQ(c.gaze.alpha, TrainConfig{}.gaze.alpha);
}

TEST(Config, UnknownKeysAndBadTypesRejected) {
  EXPECT_THROW(config_from_text(R"({"modle": {}})"), ConfigError);
  EXPECT_THROW(config_from_text(R"({"model": {"timestep": 2}})"), ConfigError);
  EXPECT_THROW(config_from_text(R"({"model": {"timesteps": -2}})"), ConfigError);
  EXPECT_THROW(config_from_text(R"({"model": {"timesteps": "four"}})"), ConfigError);
  EXPECT_THROW(config_from_text("{not json"), ConfigError);
}

TEST(Config, ValidationNamesKey) {
  TrainConfig c;
  c.gaze.lambda_loss = -1.0;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("lambda_loss"), std::string::npos) << e.what();
  }
  c = TrainConfig{};
  c.model.timesteps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.train.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, KeyResolution) {
  EXPECT_EQ(resolve_config_key("model.timesteps"), "model.timesteps");
  EXPECT_EQ(resolve_config_key("alpha"), "gaze.alpha");
  EXPECT_EQ(resolve_config_key("learning_rate"), "train.learning_rate");
  EXPECT_THROW(resolve_config_key("timesteps"), ConfigError);  // model.* and ablate.*
  EXPECT_THROW(resolve_config_key("nonsense"), ConfigError);
  const auto keys = config_keys();
  EXPECT_NE(std::find(keys.begin(), keys.end(), "data.dir"), keys.end());
  for (const auto& k : keys) EXPECT_EQ(resolve_config_key(k), k);
}

TEST(Config, OverridesAreTyped) {
  TrainConfig c;
  apply_override(c, "model.timesteps", "2");
  apply_override(c, "enable_gm", "false");
  apply_override(c, "alpha", "0.75");
  apply_override(c, "ablate.seeds", "1,2,3");
  apply_override(c, "output.dir", "x/y");
  EXPECT_EQ(c.model.timesteps, 2u);
  EXPECT_FALSE(c.gaze.enable_gm);
  EXPECT_EQ(c.gaze.alpha, 0.75);
  EXPECT_EQ(c.ablate.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(c.output.dir, "x/y");
  EXPECT_THROW(apply_override(c, "model.timesteps", "abc"), ConfigError);
  EXPECT_THROW(apply_override(c, "enable_gm", "maybe"), ConfigError);
  EXPECT_THROW(apply_override(c, "bogus", "1"), ConfigError);
}

TEST(Config, LoadFromFileAcceptsComments) {
  const auto p = std::filesystem::temp_directory_path() / "egsf_cfg.json";
  std::ofstream(p) << "{\n  // fewer steps\n  \"model\": {\"timesteps\": 2}\n}\n";
  EXPECT_EQ(load_config(p).model.timesteps, 2u);
  EXPECT_THROW(load_config(p.string() + ".missing"), ConfigError);
}

}  // namespace
}  // namespace egsf
