#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace calps::cli {

/// Runs the command line. Returns the process exit code: 0 when every fit
/// converged, 2 when some fit did not (results are still written), 1 on
/// invalid input or I/O failure (one line on `err`).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace calps::cli
