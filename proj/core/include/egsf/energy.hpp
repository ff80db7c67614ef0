// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "egsf/layer_shape.hpp"
#include "egsf/model.hpp"

namespace egsf {

/// Per-operation energies in picojoules (45 nm figures).
struct EnergyConstants {
  double e_mac = 4.6;
  double e_ac = 0.9;
  void validate() const;
};

enum class CostKind { kMac, kSpiking };

struct LayerCost {
  std::string name;
  CostKind kind = CostKind::kMac;
  double flops_per_timestep = 0.0;
  double firing_rate = 0.0;  ///< spiking layers only, in [0,1]
  std::size_t timesteps = 1;
  void validate() const;
};

struct LayerEnergy {
  LayerCost cost;
  double operations = 0.0;  ///< FLOPs for MAC layers, SOPs for spiking layers
  double energy_mj = 0.0;
};

struct EnergyReport {
  std::vector<LayerEnergy> layers;
  double total_flops = 0.0;
  double total_sops = 0.0;
  double mac_energy_mj = 0.0;
  double ac_energy_mj = 0.0;
  double total_energy_mj = 0.0;
  EnergyConstants constants;
  std::size_t timesteps = 0;
};

/// Multiply-accumulates of one layer evaluation. Conv:
/// C_out*H_out*W_out*k^2*C_in/groups. Matmul: m*k*n. An unshaped layer is a
/// ContractError.
double count_flops(const LayerDescription& layer);

/// rate * T * flops_per_timestep. A rate outside [0,1] or T = 0 is a
/// ContractError.
double count_sops(double flops_per_timestep, double firing_rate, std::size_t timesteps);

/// Energy = E_MAC * FLOPs + E_AC * SOPs, reported in millijoules.
EnergyReport estimate_energy(const std::vector<LayerCost>& costs,
                             const EnergyConstants& constants = {});

/// Maps layer descriptions and measured firing rates to costs. Static layers
/// are MAC work done once, dense layers MAC work every timestep, spike-fed
/// layers accumulate work scaled by their source's firing rate.
std::vector<LayerCost> layer_costs(const std::vector<LayerDescription>& layers,
                                   const FiringStats& firing, std::size_t timesteps);

/// Runs an inference pass over `images` ([B, C, H, W]) with `timesteps`
/// steps, measures firing rates and returns the per-sample energy report.
EnergyReport profile_model(const EgSpikeFormer& model, const Tensor& images,
                           std::size_t timesteps, const EnergyConstants& constants = {});

/// Key/value document (JSON).
std::string report_json(const EnergyReport& report);
/// Aligned human-readable table with a totals footer.
void print_report_table(std::ostream& os, const EnergyReport& report);
/// One row per layer: name,kind,flops_per_timestep,firing_rate,timesteps,operations,energy_mj
void write_report_csv(std::ostream& os, const EnergyReport& report);

}  // namespace egsf
