#pragma once

#include <string>
#include <vector>

namespace pilotwave {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

// Subcommands: trajectory | diverge | density | hseries | reverse | tau | selftest.
// Returns 0 on success, 2 on bad configuration, 3 on numerical failure.
int cmd_dispatch(int argc, const char* const* argv);
int cmd_dispatch(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace pilotwave
