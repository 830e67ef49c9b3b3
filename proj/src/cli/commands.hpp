#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace invar::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;

/// Entry point shared by the executable and the tests. args excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace invar::cli
