#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace echotrain {

/// Command-line entry point. args[0] is the program name. Returns the exit
/// code: 0 success, 1 other failure, 2 configuration or usage error,
/// 3 numerical instability, 4 closed-form branch point. Diagnostics go to err.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace echotrain
