#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ipddp {

/// Exit codes of run_command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitSolverFailure = 1;
inline constexpr int kExitConfigError = 2;

/// Entry point of the command-line tool. `args` excludes the program name.
/// Subcommands: solve, bench, verify.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_command(int argc, const char* const* argv);

}  // namespace ipddp
