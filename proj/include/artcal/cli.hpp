#pragma once

// The artcal command line: validate, calibrate, identify, divert, simulate,
// sweep and metrics. Settings come from a scenario file (see scenario.hpp)
// with flags taking precedence.
//
// Exit codes: 0 success, 1 computational failure, 2 input error (including
// usage errors). ARTCAL_LOG_LEVEL=quiet|info|debug sets how much goes to the
// error stream; the default is info.

#include <iosfwd>
#include <span>
#include <string>

namespace artcal {

inline constexpr int kExitOk = 0;
inline constexpr int kExitComputation = 1;
inline constexpr int kExitInput = 2;

// `args` excludes the program name.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace artcal
