#pragma once

#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>

namespace philab {

/// Shortest representation that round-trips; always '.' as decimal
/// separator regardless of the global locale.
inline std::string format_real(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

/// Strict full-string parse; accepts `inf`/`-inf`.
inline std::optional<double> parse_real(std::string_view text) {
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
    if (std::isnan(value)) return std::nullopt;
    return value;
}

} // namespace philab
