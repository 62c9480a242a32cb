#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace opicl::io {

/// Shortest decimal that parses back to exactly `v`.
std::string format_double(double v);
double parse_double(std::string_view s);

/// Joins already formatted fields with commas.
std::string csv_row(std::span<const std::string> fields);

/// Splits a line on commas (no quoting; our files never quote).
std::vector<std::string> split_csv_line(std::string_view line);

} // namespace opicl::io
