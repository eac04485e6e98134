#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace f2c {

// Process exit codes of the f2c binary.
enum ExitCode : int {
  kExitOk = 0,
  kExitMalformedRows = 1,
  kExitConfig = 2,
  kExitToolchain = 3,
  kExitAuth = 4,
};

/// Runs one command line; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace f2c
