#include "semloc/text.hpp"

#include <charconv>
#include <cmath>

#include "semloc/error.hpp"

namespace semloc::text {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(s.substr(start)));
            break;
        }
        out.push_back(trim(s.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

double parse_double(std::string_view s, std::string_view what) {
    const std::string t = trim(s);
    double v = 0.0;
    const auto* end = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(t.data(), end, v);
    if (t.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw Error(ErrorKind::format, "expected a number for " + std::string(what) + ", got '" + t + "'");
    }
    return v;
}

long long parse_int(std::string_view s, std::string_view what) {
    const std::string t = trim(s);
    long long v = 0;
    const auto* end = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(t.data(), end, v);
    if (t.empty() || ec != std::errc() || ptr != end) {
        throw Error(ErrorKind::format, "expected an integer for " + std::string(what) + ", got '" + t + "'");
    }
    return v;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace semloc::text
