#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace spoc {

/// Shortest decimal text that round-trips to the same double.
std::string format_number(double value);

std::vector<std::string_view> split(std::string_view text, char sep);

}  // namespace spoc
