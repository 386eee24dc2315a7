#pragma once

#include <string>
#include <vector>

namespace cellomaps::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitInternalError = 2;

/// `args` excludes the program name. Returns the process exit code.
int run(std::vector<std::string> args);

/// Reads `key = value` lines; blank lines and lines starting with '#' are ignored.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

}  // namespace cellomaps::cli
