#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace condest::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kNumerical = 3;
inline constexpr int kSimulationQuality = 4;

/// Runs one command. args excludes the program name. Data goes to out,
/// diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace condest::cli
