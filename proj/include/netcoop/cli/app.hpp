#pragma once

#include <ostream>

namespace netcoop::cli {

enum ExitCode : int
{
  exit_ok = 0,
  exit_failure = 1,
  exit_validation = 2,
  exit_enumeration_overflow = 3,
  exit_bisection_failure = 4,
};

/// Entry point of the netcoop tool with injectable streams.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace netcoop::cli
