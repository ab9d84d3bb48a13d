#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stepdeconv::cli {

// Exit codes: 0 when every requested target passed, 1 when a target failed,
// 2 on an error (a JSON error record is written to `err`).
enum ExitCode : int { kOk = 0, kTargetFailed = 1, kError = 2 };

// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace stepdeconv::cli
