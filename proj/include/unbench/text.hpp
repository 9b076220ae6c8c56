#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace unbench {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);
/// Fixed-point with `digits` decimals, for human-facing tables.
std::string format_fixed(double v, int digits);

double parse_double(std::string_view s);
std::int64_t parse_int(std::string_view s);
std::vector<std::string> split_fields(std::string_view line, char sep);

} // namespace unbench
