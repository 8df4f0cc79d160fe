#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mglstm {

/// Shortest-safe round-trip text form of a double (17 significant digits).
std::string format_double(double x);
/// Shortest text that parses back to the same double (`0.64`, `0`); used for
/// noise-level tags in file names and for config text.
std::string format_tag(double x);

double parse_double(std::string_view text);

std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

}  // namespace mglstm
