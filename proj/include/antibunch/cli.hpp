#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace antibunch::cli {

/// Process exit codes.
enum ExitCode : int { kOk = 0, kConfigError = 2, kFitError = 3, kDataError = 4 };

inline constexpr int kConfigFormatVersion = 1;

/// Runs the command line `args` (args[0] is the program name). Text output
/// goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace antibunch::cli
