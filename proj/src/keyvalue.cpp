#include "wigp/keyvalue.hpp"

#include <charconv>
#include <sstream>

#include <fmt/format.h>

#include "wigp/error.hpp"

namespace wigp {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw DataError(fmt::format("line {}: expected key=value, got '{}'", line_no, t));
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw DataError(fmt::format("line {}: empty key", line_no));
        if (!out.emplace(key, value).second) throw DataError(fmt::format("line {}: duplicate key '{}'", line_no, key));
    }
    return out;
}

double parse_real(const std::string& key, const std::string& value) {
    double v = 0.0;
    const char* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, v);
    if (ec != std::errc() || ptr != end || value.empty())
        throw DataError(fmt::format("'{}': expected a real number, got '{}'", key, value));
    return v;
}

long long parse_integer(const std::string& key, const std::string& value) {
    long long v = 0;
    const char* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, v);
    if (ec != std::errc() || ptr != end || value.empty())
        throw DataError(fmt::format("'{}': expected an integer, got '{}'", key, value));
    return v;
}

std::string format_real(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

}  // namespace wigp
