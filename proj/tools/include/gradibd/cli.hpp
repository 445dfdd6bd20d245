#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gradibd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kManifestVersion = 1;

/// Runs one subcommand. `args` excludes the program name. Primary output goes
/// to `out`; logs and errors go to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string version_string();

}  // namespace gradibd::cli
