#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace s2v {

/// Exit codes: 0 success, 1 runtime failure, 2 invalid flags or configuration.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line `args` (without the program name). Primary output (reports, loss lines)
/// goes to `out`; the resolved configuration, warnings and errors go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace s2v
