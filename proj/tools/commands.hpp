// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>

#include "run_config.hpp"

namespace conlink::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitExternal = 3,
  kExitInternal = 4,
};

int cmd_build_memory(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_retrieve(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_link(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_evaluate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_ablate(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Parses argv (subcommand, --config file, flags; flags win over the file),
/// dispatches, and maps failures to exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace conlink::cli
