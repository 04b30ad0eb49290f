#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace echoclutter::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kVerifyFailed = 3 };

/// Parses `args` (without the program name) and runs one subcommand:
/// simulate, train, filter, eval or verify. Progress goes to `out`,
/// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace echoclutter::cli
