#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wmlab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

/// Parses `args` (without the program name) and runs the subcommand.
/// Returns 0 on success, 1 on a domain error, 2 on a usage error.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace wmlab
