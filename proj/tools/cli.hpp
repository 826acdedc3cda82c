#pragma once

// Command-line front end. main() only forwards to run_cli so the tests can
// drive every subcommand in-process.

#include <iosfwd>

namespace hsolve::cli {

enum ExitCode : int {
  kOk = 0,
  kNotConverged = 1,
  kIoError = 2,
  kBadConfig = 3,
  kNumericFailure = 4,
};

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hsolve::cli
