// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "json.hpp"

#include <cmath>
#include <sstream>

#include "egsf/energy.hpp"
#include "egsf/errors.hpp"
#include "egsf/model.hpp"
#include "egsf/rng.hpp"
#include "oracles.hpp"

namespace egsf {
namespace {

LayerDescription conv(std::size_t cin, std::size_t cout, std::size_t h, std::size_t k, std::size_t groups) {
  return {"conv", ConvLayerShape{cin, cout, h, h, k, groups}, LayerInput::kDense, ""};
}

TEST(CountFlops, PointwiseConvMatchesMultiplyCount) {
  EXPECT_EQ(count_flops(conv(16, 16, 8, 1, 1)), 16384.0);
  std::size_t mults = 0;
  oracle::conv2d(Tensor({16, 8, 8}), Tensor({16, 16, 1, 1}), 1, 1, 0, &mults);
  EXPECT_EQ(static_cast<double>(mults), 16384.0);
}

TEST(CountFlops, DepthwiseConvMatchesMultiplyCount) {
  EXPECT_EQ(count_flops(conv(16, 16, 8, 3, 16)), 9216.0);
  // The oracle counts every kernel tap, padded ones included, as the formula does.
  std::size_t mults = 0;
  oracle::conv2d(Tensor({16, 8, 8}), Tensor({16, 1, 3, 3}), 16, 1, 1, &mults);
  EXPECT_EQ(static_cast<double>(mults), 9216.0);
}

TEST(CountFlops, MatmulIsMkn) {
  EXPECT_EQ(count_flops({"mm", MatmulLayerShape{2, 3, 4}, LayerInput::kDense, ""}), 24.0);
}

TEST(CountFlops, UnshapedLayerIsContractError) {
  EXPECT_THROW(count_flops(LayerDescription{"x", std::monostate{}, LayerInput::kDense, ""}), ContractError);
}

TEST(CountSops, Examples) {
  EXPECT_EQ(count_sops(1000, 0.0, 4), 0.0);
  EXPECT_EQ(count_sops(1000, 0.25, 4), 1000.0);
  EXPECT_EQ(count_sops(1000, 1.0, 1), 1000.0);
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const double f = std::floor(rng.uniform(0, 1e6)), r = rng.uniform();
    const std::size_t T = 1 + rng.below(8);
    EXPECT_EQ(count_sops(f, r, 2 * T), 2.0 * count_sops(f, r, T));
  }
  EXPECT_THROW(count_sops(10, 1.5, 1), ContractError);
  EXPECT_THROW(count_sops(10, -0.1, 1), ContractError);
  EXPECT_THROW(count_sops(10, 0.5, 0), ContractError);
}

TEST(EstimateEnergy, PaperConstantsGiveExactMillijoules) {
  auto mac = estimate_energy({{"c", CostKind::kMac, 1e9, 0.0, 1}});
  EXPECT_EQ(mac.total_energy_mj, 4.6);
  EXPECT_EQ(mac.total_flops, 1e9);
  EXPECT_EQ(mac.total_sops, 0.0);
  auto ac = estimate_energy({{"s", CostKind::kSpiking, 1e9, 1.0, 1}});
  EXPECT_EQ(ac.total_energy_mj, 0.9);
  EXPECT_EQ(ac.total_sops, 1e9);
}

TEST(EstimateEnergy, SilentSpikingLayersLeaveMacEnergy) {
  auto r = estimate_energy({{"c", CostKind::kMac, 5e6, 0.0, 1}, {"s", CostKind::kSpiking, 7e6, 0.0, 4}});
  EXPECT_EQ(r.ac_energy_mj, 0.0);
  EXPECT_EQ(r.total_energy_mj, r.mac_energy_mj);
}

TEST(EstimateEnergy, LinearAndTotalsMatchComponents) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<LayerCost> costs, doubled;
    for (int i = 0; i < 6; ++i) {
      LayerCost c{"l" + std::to_string(i), rng.below(2) ? CostKind::kMac : CostKind::kSpiking,
                  std::floor(rng.uniform(1, 1e7)), rng.uniform(), 1 + rng.below(4)};
      costs.push_back(c);
      c.flops_per_timestep *= 2.0;
      doubled.push_back(c);
    }
    auto a = estimate_energy(costs), b = estimate_energy(doubled);
    EXPECT_NEAR(b.total_energy_mj, 2.0 * a.total_energy_mj, 1e-12 * a.total_energy_mj);
    double sum = 0.0;
    for (const auto& l : a.layers) sum += l.energy_mj;
    EXPECT_NEAR(sum, a.total_energy_mj, 1e-9 * a.total_energy_mj);
    EXPECT_NEAR(a.mac_energy_mj + a.ac_energy_mj, a.total_energy_mj, 1e-9 * a.total_energy_mj);
  }
}

TEST(EstimateEnergy, InvalidCostsRejected) {
  EXPECT_THROW(estimate_energy({{"s", CostKind::kSpiking, 10, 2.0, 1}}), ContractError);
  EXPECT_THROW(estimate_energy({{"c", CostKind::kMac, -1, 0.0, 1}}), ContractError);
  EXPECT_THROW(estimate_energy({{"c", CostKind::kMac, 1, 0.0, 1}}, EnergyConstants{0.0, 0.9}), ContractError);
}

TEST(ProfileModel, ZeroInputHasNoSpikingEnergy) {
  EgSpikeFormer model(ModelConfig{}, LifParams{}, 0);
  auto r = profile_model(model, Tensor({2, 1, 32, 32}), 4);
  EXPECT_EQ(r.total_sops, 0.0);
  EXPECT_EQ(r.ac_energy_mj, 0.0);
  EXPECT_GT(r.mac_energy_mj, 0.0);
}

TEST(ProfileModel, MoreTimestepsCostMoreButAtMostDouble) {
  EgSpikeFormer model(ModelConfig{}, LifParams{}, 1);
  Rng rng(3);
  Tensor batch = random_uniform({4, 1, 32, 32}, rng, 0.0, 1.0);
  auto t2 = profile_model(model, batch, 2), t4 = profile_model(model, batch, 4);
  EXPECT_GT(t4.total_energy_mj, t2.total_energy_mj);
  EXPECT_LE(t4.total_energy_mj / t2.total_energy_mj, 2.0);
  EXPECT_EQ(t4.timesteps, 4u);
}

TEST(ProfileModel, Deterministic) {
  EgSpikeFormer model(ModelConfig{}, LifParams{}, 2);
  Rng rng(4);
  Tensor batch = random_uniform({3, 1, 32, 32}, rng, 0.0, 1.0);
  EXPECT_EQ(report_json(profile_model(model, batch, 4)), report_json(profile_model(model, batch, 4)));
}

TEST(ProfileModel, ClassifiesStemAsMacAndSpikeFedLayersAsSpiking) {
  EgSpikeFormer model(ModelConfig{}, LifParams{}, 3);
  Rng rng(5);
  auto r = profile_model(model, random_uniform({2, 1, 32, 32}, rng, 0.0, 1.0), 4);
  for (const auto& l : r.layers) {
    if (l.cost.name.rfind("stem.", 0) == 0) {
      EXPECT_EQ(l.cost.kind, CostKind::kMac) << l.cost.name;
      EXPECT_EQ(l.cost.timesteps, 1u);
    }
    if (l.cost.name == "tokenizer.embed" || l.cost.name == "head.fc") EXPECT_EQ(l.cost.kind, CostKind::kSpiking);
  }
}

TEST(Report, JsonTableAndCsvAgree) {
  auto r = estimate_energy({{"c", CostKind::kMac, 1e9, 0.0, 1}, {"s", CostKind::kSpiking, 2e9, 0.5, 2}});
  auto j = nlohmann::json::parse(report_json(r));
  EXPECT_EQ(j["total_energy_mj"].get<double>(), r.total_energy_mj);
  EXPECT_EQ(j["layers"].size(), 2u);
  std::ostringstream table, csv;
  print_report_table(table, r);
  write_report_csv(csv, r);
  EXPECT_NE(table.str().find("total"), std::string::npos);
  std::size_t lines = 0;
  for (char ch : csv.str()) lines += ch == '\n';
  EXPECT_EQ(lines, 3u);
}

}  // namespace
}  // namespace egsf
