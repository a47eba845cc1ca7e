#pragma once

// The `evobot` command line. Exit codes: 0 success, 1 usage error,
// 2 config error, 3 runtime failure. Failures also print one JSON line
// {"error": ..., "message": ...} on the error stream.

#include <iosfwd>
#include <string>
#include <vector>

namespace evobot {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace evobot
