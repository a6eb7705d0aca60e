#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dragdrop::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs one command line (without the program name). Subcommands: simulate, propagate,
/// evaluate, froc, phantom, serve.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Applies DRAGDROP_LOG (trace, debug, info, warn, error, critical, off) to a stderr logger.
void configure_logging();

}  // namespace dragdrop::cli
