#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace poselift::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUnexpected = 1,
  kExitValidation = 2,
  kExitNumerical = 3,
};

/// Runs one command line (without the program name). Results go to `out`,
/// diagnostics to `err`; the return value is the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace poselift::cli
