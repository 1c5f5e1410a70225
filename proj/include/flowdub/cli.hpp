#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace flowdub::cli {

// Stable process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitInvalid = 3;
inline constexpr int kExitParse = 4;

// Entry point shared by the binary and the tests. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flowdub::cli
