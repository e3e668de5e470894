#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace equirec::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitDataError = 2;

/// Runs one subcommand. `args` excludes the program name. The resolved
/// configuration is echoed as JSON on `out`; diagnostics go to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace equirec::cli
