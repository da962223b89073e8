#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace polymetric {

/// Runs one command line (args excludes the program name). Returns the
/// process exit status; reports go to `out`, diagnostics and usage to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace polymetric
