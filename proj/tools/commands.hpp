#pragma once

#include <string>
#include <vector>

namespace expevo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Appends "--key value" for every key=value line of the file named by
// --config that is not already given on the command line.
std::vector<std::string> apply_config_file(std::vector<std::string> args);

// args[0] is the program name.
int run(std::vector<std::string> args);

}  // namespace expevo::cli
