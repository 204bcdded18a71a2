#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gk::text {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
    s = trim(s);
    std::int64_t value = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (s.empty() || ec != std::errc() || ptr != end) return std::nullopt;
    return value;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    std::string copy(s);
    std::size_t used = 0;
    try {
        double v = std::stod(copy, &used);
        if (used != copy.size()) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

struct KeyValue {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

// `key = value` lines; blank lines and `#` comments skipped. On a malformed
// line returns empty and stores its 1-based number in *bad_line (else 0).
inline std::vector<KeyValue> read_key_values(std::istream& in, std::size_t* bad_line) {
    std::vector<KeyValue> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = trim(line);
        if (view.empty() || view.front() == '#') continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos || trim(view.substr(0, eq)).empty()) {
            if (bad_line) *bad_line = lineno;
            return {};
        }
        out.push_back({std::string(trim(view.substr(0, eq))),
                       std::string(trim(view.substr(eq + 1))), lineno});
    }
    if (bad_line) *bad_line = 0;
    return out;
}

}  // namespace gk::text
