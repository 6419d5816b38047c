#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tfoc::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kRuntimeError = 3 };

// Runs one subcommand. `args` excludes the program name. Results go to `out`;
// diagnostics and log lines go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tfoc::cli
