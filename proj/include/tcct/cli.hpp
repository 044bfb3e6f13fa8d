#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tcct::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kDataError = 3,
  kShapeError = 4,
};

// Runs one command line (args[0] is the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tcct::cli
