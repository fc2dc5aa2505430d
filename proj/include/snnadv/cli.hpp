#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace snnadv {

/// Entry point behind the snnadv binary. args excludes the program name.
/// Returns the process exit code; failures print one line
/// "error: <category>: <message>" to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace snnadv
