// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "egsf/model.hpp"

namespace egsf {

// Checkpoint container, all integers and reals little-endian:
//
//   char[8]  magic "EGSFCKPT"
//   u32      format version
//   u64 x 10 ModelConfig fields in declaration order
//   f64 x 4  LifParams (v_threshold, v_reset, leak, surrogate_width)
//   u64      tensor count
//   per tensor:
//     u32 name length, name bytes (UTF-8, no terminator)
//     u8  kind (0 parameter, 1 buffer)
//     u32 rank, u64 x rank extents
//     f64 x numel values
//   u64      FNV-1a hash of every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  bool is_buffer = false;
  Tensor value;
};

struct Checkpoint {
  ModelConfig model;
  LifParams lif;
  std::vector<CheckpointTensor> tensors;
};

Checkpoint snapshot(const EgSpikeFormer& model);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError on a bad magic, unknown version, truncation or hash
/// mismatch.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const EgSpikeFormer& model, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies every tensor of `ckpt` into `model`. Names and shapes must match
/// exactly; anything missing or extra is a FormatError.
void restore(EgSpikeFormer& model, const Checkpoint& ckpt);

/// Builds a model from a checkpoint file.
EgSpikeFormer load_model(const std::filesystem::path& path);

}  // namespace egsf
