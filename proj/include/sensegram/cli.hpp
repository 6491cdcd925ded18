#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace sensegram::cli {

/// Runs the `sensegram` command line. args[0] is the program name.
/// Exit codes: 0 success, 1 usage error, 2 data or I/O error.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace sensegram::cli
