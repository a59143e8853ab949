#pragma once

// In-process command line front end. run_cli parses one invocation (program
// name excluded) and executes it, writing results and diagnostics to the
// given streams. Returns the process exit code: 0 on success, nonzero on any
// parse or execution failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace tierplan {

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace tierplan
