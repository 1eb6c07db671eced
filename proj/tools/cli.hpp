#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace eigenshrink::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kSolver = 2 };

/// Parses `args` (without the program name) and runs one subcommand.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace eigenshrink::cli
