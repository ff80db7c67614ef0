// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include <malloc.h>

#include <iostream>

#include "egsf_tools/cli.hpp"

int main(int argc, char** argv) {
  // Training allocates and frees the same large activation buffers every
  // step; keeping them in the heap avoids a page-fault storm.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  std::vector<std::string> args(argv + 1, argv + argc);
  return egsf::tools::cli(args, std::cout, std::cerr);
}
