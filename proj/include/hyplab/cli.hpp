#pragma once

#include <string>
#include <vector>

namespace hyplab::cli {

// Exit codes: 0 success, 1 numerical failure (error.json written), 2 usage error.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace hyplab::cli
