#pragma once

#include <ostream>

namespace socpalm::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kNotConverged = 3,
  kInternalError = 4,
};

/// Entry point of the `socpalm` command line tool. Subcommands: solve, gen,
/// check, diag.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace socpalm::cli
