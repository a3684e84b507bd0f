#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace obbkit::cli {

/// Exit codes: 0 success, 1 internal error, 2 input or validation error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInvalid = 2;

/// Runs `obbkit <args...>`; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace obbkit::cli
