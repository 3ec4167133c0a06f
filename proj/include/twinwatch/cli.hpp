#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace twinwatch {

/// Exit codes: 0 success, 1 usage or validation error, 2 I/O error.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace twinwatch
