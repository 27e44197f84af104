#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lenmap::cli {

/// Runs one command. `args` excludes the program name.
/// Exit codes: 0 success, 1 runtime failure, 2 invalid flags, 3 length map
/// diverged where a finite reference is required.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lenmap::cli
