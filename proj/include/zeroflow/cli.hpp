#pragma once

#include <string>
#include <vector>

namespace zf {

/// Entry point of the `zeroflow` command. Returns 0 on success, 1 on
/// domain errors (bad data, numeric failure, mismatched inputs) and 2 on
/// usage errors.
int run_cli(int argc, const char* const* argv);
/// Same, with the arguments after the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace zf
