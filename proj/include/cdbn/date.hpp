#pragma once

#include <chrono>
#include <charconv>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace cdbn {

/// Calendar date; days since the Unix epoch underneath.
using Date = std::chrono::sys_days;

/// Parses strict `YYYY-MM-DD`. Anything else (including invalid calendar
/// dates like 2021-02-30) yields nullopt.
inline std::optional<Date> parse_iso_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    auto field = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
        int v = 0;
        auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
        if (ec != std::errc{} || ptr != text.data() + pos + len) return std::nullopt;
        return v;
    };
    auto y = field(0, 4), m = field(5, 2), d = field(8, 2);
    if (!y || !m || !d) return std::nullopt;
    std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
                                    std::chrono::day{static_cast<unsigned>(*d)}};
    if (!ymd.ok()) return std::nullopt;
    return Date{ymd};
}

inline std::string format_iso_date(Date date) {
    std::chrono::year_month_day ymd{date};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

inline bool is_weekend(Date date) {
    std::chrono::weekday wd{date};
    return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

} // namespace cdbn
