#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace svft::cli {

enum ExitCode : int {
  kOk = 0,
  kPropertyFailure = 1,
  kUsage = 2,
  kIoOrFormat = 3,
};

/// Runs one command line (without the program name) and returns its exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace svft::cli
