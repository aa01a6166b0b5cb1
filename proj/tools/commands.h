#pragma once

#include <iosfwd>
#include <string>

#include "config.h"

namespace splitroa::cli {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitSolver = 2, kExitAborted = 3 };

struct CommandContext {
  RunConfig config;
  /// Degree-N evaluation along the parameter path stored in this trace.
  std::string eval_path;
  std::ostream* log = nullptr;
};

int cmd_solve(const CommandContext& ctx);
int cmd_optimize(const CommandContext& ctx);
int cmd_gradcheck(const CommandContext& ctx);
int cmd_benchmark(const CommandContext& ctx);

/// Spreads `count` state splits evenly over the axes (earlier axes get the remainder).
SplitConfig spread_state_splits(const SystemSpec& sys, int count);

}  // namespace splitroa::cli
