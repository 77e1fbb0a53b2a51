#pragma once

#include <iosfwd>

#include "xfit/config.hpp"

namespace xfit {

/// Runs a validated configuration; throws on failure.
void run(const RunConfig& config, std::ostream& log);

/// Command-line entry: parses, runs, and on failure prints a JSON error
/// record to `err` (and error.json in the output directory when possible).
/// Exit codes: 0 ok, 2 configuration/input error, 1 any other failure.
int run_main(int argc, const char* const* argv, std::ostream& log, std::ostream& err);

}  // namespace xfit
