#pragma once

#include <map>
#include <string>

namespace wigp {

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// skipped; duplicate keys and lines without '=' throw DataError.
std::map<std::string, std::string> parse_key_values(const std::string& text);

double parse_real(const std::string& key, const std::string& value);
long long parse_integer(const std::string& key, const std::string& value);

/// Shortest text that parses back to exactly `value`.
std::string format_real(double value);

}  // namespace wigp
