// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "frameind/cli.hpp"

int main(int argc, char** argv) {
  return frameind::run_cli(argc, argv, std::cout, std::cerr);
}
