#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace farms::cli {

enum exit_code : int { ok = 0, partial = 1, fatal = 2 };

/// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace farms::cli
