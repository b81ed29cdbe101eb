#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace limes::cli {

enum ExitCode : int {
  ok = 0,
  unexpected = 1,
  invalid_config = 2,
  not_convex = 3,
  numerical_failure = 4,
};

/// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace limes::cli
