#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace distress {

/// Runs one subcommand; `args` excludes the program name. Returns 0 on
/// success, 1 for usage errors and invalid input, 2 for internal faults.
/// Every flag can also be set through a `DISTRESS_<FLAG>` environment
/// variable (upper case, dashes as underscores); flags win.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace distress
