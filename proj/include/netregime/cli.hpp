#pragma once

#include <string>
#include <vector>

namespace netregime {

// Parses and runs one command; args excludes the program name.  All errors
// are reported on stderr and turned into the exit codes declared in
// errors.hpp, so this never throws.
int run_cli(const std::vector<std::string>& args);

}  // namespace netregime
