#pragma once

#include <ostream>

namespace cascade {

/// Command-line entry point: run | sweep | trace-expected-cost | plan |
/// validate-config. Returns the process exit status (0 ok, 1 run failure,
/// 2 configuration or usage error).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cascade
