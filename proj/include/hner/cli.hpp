#pragma once

#include <string>
#include <vector>

namespace hner {

// Exit codes: 0 success, 1 usage error, 2 data/validation error.
int run_cli(const std::vector<std::string>& args);

}  // namespace hner
