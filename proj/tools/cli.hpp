#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ecgadv::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line `args` (without the program name). Normal output goes
/// to `out`, diagnostics and usage text to `err`.
///
/// Subcommands: gen-data, train, eval, attack, band, plot.
/// Exit codes: 0 success, 1 runtime failure, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ecgadv::cli
