#pragma once

#include <iosfwd>

namespace sploc {

/// Entry point of the `sploc` tool. Returns the process exit code: 0 on
/// success, 1 for runtime failures, 2 for invalid input.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sploc
