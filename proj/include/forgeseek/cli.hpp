#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace forgeseek {

/// Exit statuses of the command-line front-end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs the `forgeseek` command line; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace forgeseek
