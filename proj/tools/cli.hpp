#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vpsvm::cli {

/// Process exit codes.
enum exit_code : int {
    ok = 0,
    parse_failure = 2,
    config_failure = 3,
    runtime_failure = 4,
};

/// Runs one command line (without the program name). Never throws.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace vpsvm::cli
