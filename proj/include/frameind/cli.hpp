// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace frameind {

// Exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitBackend = 3,
};

// Entry point of the `frameind` tool. Results go to `out`, diagnostics and
// progress to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace frameind
