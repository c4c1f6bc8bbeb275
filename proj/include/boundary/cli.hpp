#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace boundary::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitPartialFailures = 2;

// Entry point behind the `boundary` binary; exposed so tests can drive the
// CLI in-process. argv excludes the program name.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace boundary::cli
