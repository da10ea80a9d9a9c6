#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mlfdr {

/// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
/// Errors are written to `err` as a single line
///   error code=<n> kind=<usage|data|numerical> message="<text>"
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace mlfdr
