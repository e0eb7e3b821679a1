#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace semloc::text {

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// Strict parse; throws Error(format) naming `what` on failure or trailing garbage.
double parse_double(std::string_view s, std::string_view what);
long long parse_int(std::string_view s, std::string_view what);

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

}  // namespace semloc::text
