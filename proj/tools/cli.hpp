#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hmcd::cli {

// Exit codes.
inline constexpr int kSuccess = 0;
inline constexpr int kRuntimeFailure = 1;
inline constexpr int kUsageError = 2;

// Entry point of the `hmcd` tool. Every option can also be supplied through an
// environment variable HMCD_<LONG_NAME> (dashes become underscores).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Convenience for tests: args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hmcd::cli
