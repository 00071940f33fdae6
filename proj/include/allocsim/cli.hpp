#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace allocsim {

/// Exit codes of the command-line driver.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitRuntime = 3 };

/// Runs one subcommand (gen-cohort, fit, simulate, compare, sweep, tune).
/// Errors are reported on `err` as a single JSON object.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, char** argv);

}  // namespace allocsim
