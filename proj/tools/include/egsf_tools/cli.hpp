// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace egsf::tools {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `egsf` tool. `args` excludes the program name.
/// Returns 0 on success, 2 on usage or config errors, 1 on runtime failure.
int cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace egsf::tools
