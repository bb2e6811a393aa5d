#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ledgergate::cli {

/// Runs the command line `args` (without the program name). Returns the
/// process exit code: 0 on success, 1 on failure, 2 on usage errors.
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Asks a running `run` subcommand to shut down.
void request_stop();

}  // namespace ledgergate::cli
