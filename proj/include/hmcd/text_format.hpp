#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hmcd {

// Shortest decimal form that parses back to the same double (inf/nan spelled out).
std::string format_double(double v);

// Fixed-point with the given number of decimals, for report tables.
std::string format_fixed(double v, int decimals);

// Parses the whole token as a double; throws ParseError on trailing junk.
double parse_double(std::string_view token, std::size_t line = 0);
long long parse_integer(std::string_view token, std::size_t line = 0);
unsigned long long parse_unsigned(std::string_view token, std::size_t line = 0);

std::vector<std::string_view> split(std::string_view s, char delim);
std::string_view trim(std::string_view s);

}  // namespace hmcd
