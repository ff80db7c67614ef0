// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>

#include "egsf/tensor.hpp"

namespace egsf {

inline constexpr std::uint32_t kPgmMax = 65535;

/// Nearest 16-bit level of a value in [0,1] (values outside are clamped).
std::uint16_t quantize16(double v);
inline double dequantize16(std::uint16_t q) { return static_cast<double>(q) / kPgmMax; }

/// Writes an [H, W] tensor with values in [0,1] as binary 16-bit PGM (P5,
/// maxval 65535, big-endian samples).
void write_pgm16(const std::filesystem::path& path, const Tensor& image);
/// Reads a binary PGM back as [H, W] in [0,1]. Accepts maxval up to 65535.
Tensor read_pgm16(const std::filesystem::path& path);

}  // namespace egsf
