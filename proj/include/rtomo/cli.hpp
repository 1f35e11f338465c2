#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rtomo::cli {

/// Exit codes: 0 success, 1 usage, 2 I/O, 3 numerical failure or failed check.
enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kNumerical = 3 };

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace rtomo::cli
