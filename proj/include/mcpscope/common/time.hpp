#pragma once

#include <chrono>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace mcpscope {

using Date = std::chrono::sys_days;
using Timestamp = std::chrono::sys_seconds;

/// Calendar month, the unit of every download and share series.
struct YearMonth {
    int year = 2024;
    unsigned month = 11;

    auto operator<=>(const YearMonth&) const = default;

    static YearMonth parse(std::string_view text);  // "2025-01"
    static YearMonth of(Date date);
    static YearMonth of(Timestamp ts);

    [[nodiscard]] std::string str() const;
    [[nodiscard]] YearMonth plus(int months) const;
    [[nodiscard]] Date first_day() const;
    [[nodiscard]] Date last_day() const;
    /// Whole months from `origin` to this month (negative when earlier).
    [[nodiscard]] int index_from(YearMonth origin) const;
};

/// Start of the download window; month index 0 for all trend fits.
inline constexpr YearMonth kSeriesOrigin{2024, 11};
inline constexpr YearMonth kSeriesEnd{2026, 2};

Date parse_date(std::string_view text);  // "YYYY-MM-DD" (a trailing time part is ignored)
std::string format_date(Date date);

/// ISO-8601 timestamp: "YYYY-MM-DDTHH:MM:SS[.fff](Z|+hh:mm|-hh:mm)", or a bare date.
Timestamp parse_timestamp(std::string_view text);
std::optional<Timestamp> try_parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp ts);

inline Date to_date(Timestamp ts) { return std::chrono::floor<std::chrono::days>(ts); }

}  // namespace mcpscope
