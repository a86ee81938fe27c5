#pragma once

#include <iosfwd>

namespace sage::shell {

/// Entry point of the `sage` tool. Exit codes: 0 success, 1 partial or
/// runtime failure (counts are reported), 2 usage or configuration error.
int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace sage::shell
