// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include "egsf/energy.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "egsf/errors.hpp"
#include "json.hpp"

namespace egsf {
namespace {

constexpr double kPicoToMilli = 1e9;

const char* kind_name(CostKind k) { return k == CostKind::kMac ? "mac" : "spiking"; }

}  // namespace

void EnergyConstants::validate() const {
  if (!(e_mac > 0.0) || !(e_ac > 0.0)) {
    throw ContractError("energy constants must be positive");
  }
}

void LayerCost::validate() const {
  if (!(flops_per_timestep >= 0.0)) throw ContractError(name + ": negative FLOP count");
  if (timesteps == 0) throw ContractError(name + ": timesteps must be at least 1");
  if (kind == CostKind::kSpiking && !(firing_rate >= 0.0 && firing_rate <= 1.0)) {
    throw ContractError(name + ": firing rate " + std::to_string(firing_rate) +
                        " outside [0,1]");
  }
}

double count_flops(const LayerDescription& layer) {
  if (const auto* c = std::get_if<ConvLayerShape>(&layer.shape)) {
    if (c->groups == 0 || c->c_in % c->groups != 0) {
      throw ContractError(layer.name + ": groups must divide c_in");
    }
    return static_cast<double>(c->c_out) * static_cast<double>(c->h_out) *
           static_cast<double>(c->w_out) * static_cast<double>(c->kernel * c->kernel) *
           static_cast<double>(c->c_in / c->groups);
  }
  if (const auto* m = std::get_if<MatmulLayerShape>(&layer.shape)) {
    return static_cast<double>(m->m) * static_cast<double>(m->k) * static_cast<double>(m->n);
  }
  throw ContractError("count_flops: layer '" + layer.name + "' has no shape");
}

double count_sops(double flops_per_timestep, double firing_rate, std::size_t timesteps) {
  if (!(firing_rate >= 0.0 && firing_rate <= 1.0)) {
    throw ContractError("count_sops: firing rate " + std::to_string(firing_rate) +
                        " outside [0,1]");
  }
  if (timesteps == 0) throw ContractError("count_sops: timesteps must be at least 1");
  return firing_rate * static_cast<double>(timesteps) * flops_per_timestep;
}

EnergyReport estimate_energy(const std::vector<LayerCost>& costs,
                             const EnergyConstants& constants) {
  constants.validate();
  EnergyReport report;
  report.constants = constants;
  for (const auto& c : costs) {
    c.validate();
    LayerEnergy le{c, 0.0, 0.0};
    if (c.kind == CostKind::kMac) {
      le.operations = c.flops_per_timestep * static_cast<double>(c.timesteps);
      le.energy_mj = le.operations * constants.e_mac / kPicoToMilli;
      report.total_flops += le.operations;
      report.mac_energy_mj += le.energy_mj;
    } else {
      le.operations = count_sops(c.flops_per_timestep, c.firing_rate, c.timesteps);
      le.energy_mj = le.operations * constants.e_ac / kPicoToMilli;
      report.total_sops += le.operations;
      report.ac_energy_mj += le.energy_mj;
    }
    report.timesteps = std::max(report.timesteps, c.timesteps);
    report.layers.push_back(std::move(le));
  }
  report.total_energy_mj = report.mac_energy_mj + report.ac_energy_mj;
  return report;
}

std::vector<LayerCost> layer_costs(const std::vector<LayerDescription>& layers,
                                   const FiringStats& firing, std::size_t timesteps) {
  std::vector<LayerCost> costs;
  for (const auto& l : layers) {
    LayerCost c;
    c.name = l.name;
    c.flops_per_timestep = count_flops(l);
    switch (l.input) {
      case LayerInput::kStatic:
        c.kind = CostKind::kMac;
        c.timesteps = 1;
        break;
      case LayerInput::kDense:
        c.kind = CostKind::kMac;
        c.timesteps = timesteps;
        break;
      case LayerInput::kSpikes:
        c.kind = CostKind::kSpiking;
        c.timesteps = timesteps;
        c.firing_rate = firing.rate(l.spike_source);
        break;
    }
    costs.push_back(std::move(c));
  }
  return costs;
}

EnergyReport profile_model(const EgSpikeFormer& model, const Tensor& images,
                           std::size_t timesteps, const EnergyConstants& constants) {
  if (images.rank() != 4 || images.dim(0) == 0) {
    throw DimensionError("profile_model: expected a nonempty [B, C, H, W] batch, got " +
                         shape_string(images.shape()));
  }
  Tape tape(false);
  ModelOutput out = model.forward(tape, make_var(images), false, timesteps);
  EnergyReport report =
      estimate_energy(layer_costs(model.layer_descriptions(), out.firing, timesteps), constants);
  report.timesteps = timesteps;
  return report;
}

std::string report_json(const EnergyReport& r) {
  nlohmann::ordered_json j;
  j["schema"] = "egsf.energy/1";
  j["timesteps"] = r.timesteps;
  j["constants_pj"] = {{"e_mac", r.constants.e_mac}, {"e_ac", r.constants.e_ac}};
  auto layers = nlohmann::ordered_json::array();
  for (const auto& l : r.layers) {
    nlohmann::ordered_json e;
    e["name"] = l.cost.name;
    e["kind"] = kind_name(l.cost.kind);
    e["flops_per_timestep"] = l.cost.flops_per_timestep;
    if (l.cost.kind == CostKind::kSpiking) e["firing_rate"] = l.cost.firing_rate;
    e["timesteps"] = l.cost.timesteps;
    e["operations"] = l.operations;
    e["energy_mj"] = l.energy_mj;
    layers.push_back(std::move(e));
  }
  j["layers"] = std::move(layers);
  j["total_flops"] = r.total_flops;
  j["total_sops"] = r.total_sops;
  j["mac_energy_mj"] = r.mac_energy_mj;
  j["ac_energy_mj"] = r.ac_energy_mj;
  j["total_energy_mj"] = r.total_energy_mj;
  j["excluded"] = "elementwise ops (batch norm, residual adds, LIF updates)";
  return j.dump(2);
}

void print_report_table(std::ostream& os, const EnergyReport& r) {
  auto line = [&](const std::string& name, const std::string& kind, const std::string& rate,
                  const std::string& ops, const std::string& mj) {
    os << std::left << std::setw(18) << name << std::setw(9) << kind << std::right
       << std::setw(8) << rate << std::setw(16) << ops << std::setw(16) << mj << '\n';
  };
  auto num = [](double v, int prec, bool sci) {
    std::ostringstream s;
    if (sci) s << std::scientific;
    else s << std::fixed;
    s << std::setprecision(prec) << v;
    return s.str();
  };
  line("layer", "kind", "rate", "ops", "energy (mJ)");
  for (const auto& l : r.layers) {
    const bool spk = l.cost.kind == CostKind::kSpiking;
    line(l.cost.name, kind_name(l.cost.kind), spk ? num(l.cost.firing_rate, 3, false) : "-",
         num(l.operations, 0, false), num(l.energy_mj, 4, true));
  }
  os << "FLOPs " << num(r.total_flops, 0, false) << "  SOPs " << num(r.total_sops, 0, false)
     << "  T=" << r.timesteps << '\n';
  os << "MAC " << num(r.mac_energy_mj, 4, true) << " mJ  AC " << num(r.ac_energy_mj, 4, true)
     << " mJ  total " << num(r.total_energy_mj, 4, true) << " mJ\n";
  os << "(E_MAC " << r.constants.e_mac << " pJ, E_AC " << r.constants.e_ac
     << " pJ; elementwise ops not counted)\n";
}

void write_report_csv(std::ostream& os, const EnergyReport& r) {
  os << "name,kind,flops_per_timestep,firing_rate,timesteps,operations,energy_mj\n";
  os << std::setprecision(17);
  for (const auto& l : r.layers) {
    os << l.cost.name << ',' << kind_name(l.cost.kind) << ',' << l.cost.flops_per_timestep << ','
       << l.cost.firing_rate << ',' << l.cost.timesteps << ',' << l.operations << ','
       << l.energy_mj << '\n';
  }
}

}  // namespace egsf
