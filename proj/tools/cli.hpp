#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace regionalign::cli {

/// Exit codes of the command-line surface.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

/// Runs one invocation. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace regionalign::cli
