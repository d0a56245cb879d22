#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace depthforge {

/// Runs one command; args excludes the program name. Returns the exit code:
/// 0 success, 2 validation error, 3 numeric failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace depthforge
