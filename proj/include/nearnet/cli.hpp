#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nearnet {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitNumerical = 3,
  kExitNotManufacturable = 4,
};

/// Subcommands: optimize, analyze-imf, gen-supports, plan-removal, export.
/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nearnet
