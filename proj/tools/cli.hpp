#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace spoc::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kDataError = 2;
inline constexpr int kNumericFailure = 3;

/// Runs one command line (args[0] is the program name). Results go to
/// `out`, logs and errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spoc::cli
