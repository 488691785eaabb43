#pragma once

#include <string>
#include <vector>

namespace rcsopt::cli {

// Exit codes: 0 success, 2 configuration/usage error, 3 non-convergence,
// 4 sensitivity-check tolerance failure.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // without program name

}  // namespace rcsopt::cli
