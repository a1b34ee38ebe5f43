#pragma once

// Command-line front end: train, validate-bounds and sweep.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
// 3 divergence, 4 bound violation, 5 I/O failure.

#include <string>
#include <vector>

namespace otapfl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitBoundViolation = 4;
inline constexpr int kExitIo = 5;

/// Parses arguments (argv[0] is the program name) and runs the subcommand.
/// Never throws; failures are reported on stderr and through the exit code.
int run_cli(int argc, const char* const* argv);

int run_cli(const std::vector<std::string>& args);

}  // namespace otapfl
