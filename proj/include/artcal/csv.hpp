#pragma once

// Minimal CSV helpers. Fields never contain commas or quotes (ids are
// validated on load), so no quoting is performed.

#include <string>
#include <string_view>
#include <vector>

namespace artcal {

std::vector<std::string> split_csv_line(std::string_view line);

// Shortest round-trip decimal representation; "inf"/"-inf"/"nan" otherwise.
std::string format_number(double value);

// Parses a full-string decimal number; throws InputError naming `what`.
double parse_number(std::string_view text, std::string_view what);

}  // namespace artcal
