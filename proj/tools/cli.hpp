#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace apifreq::cli {

enum ExitCode : int { kOk = 0, kDomainError = 1, kUsageError = 2 };

/// Parses `args` (args[0] is the program name) and runs one subcommand.
/// Data goes to `out`, progress and diagnostics to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace apifreq::cli
