#pragma once

#include <string>
#include <string_view>

namespace fedsim {

/// Shortest decimal form that round-trips to the same double. Independent of
/// the C locale.
std::string format_real(double value);

/// Parses a real written by format_real (or any plain decimal/exponent form).
/// Throws Error(kConfig) naming `what` on malformed input.
double parse_real(std::string_view text, std::string_view what);

}  // namespace fedsim
