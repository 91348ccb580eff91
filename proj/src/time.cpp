#include "mcpscope/common/time.hpp"

#include <charconv>
#include <stdexcept>

#include <fmt/format.h>

namespace mcpscope {

namespace {

int read_int(std::string_view text, std::size_t pos, std::size_t len, std::string_view whole) {
    if (pos + len > text.size()) {
        throw std::invalid_argument(fmt::format("truncated date/time '{}'", whole));
    }
    int value = 0;
    auto first = text.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, value);
    if (ec != std::errc{} || ptr != first + len) {
        throw std::invalid_argument(fmt::format("malformed date/time '{}'", whole));
    }
    return value;
}

Date make_date(int y, int m, int d, std::string_view whole) {
    using namespace std::chrono;
    year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) {
        throw std::invalid_argument(fmt::format("invalid calendar date '{}'", whole));
    }
    return sys_days{ymd};
}

}  // namespace

YearMonth YearMonth::parse(std::string_view text) {
    if (text.size() < 7 || text[4] != '-') {
        throw std::invalid_argument(fmt::format("expected YYYY-MM, got '{}'", text));
    }
    YearMonth ym{read_int(text, 0, 4, text), static_cast<unsigned>(read_int(text, 5, 2, text))};
    if (ym.month < 1 || ym.month > 12) {
        throw std::invalid_argument(fmt::format("month out of range in '{}'", text));
    }
    return ym;
}

YearMonth YearMonth::of(Date date) {
    std::chrono::year_month_day ymd{date};
    return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month())};
}

YearMonth YearMonth::of(Timestamp ts) { return of(to_date(ts)); }

std::string YearMonth::str() const { return fmt::format("{:04d}-{:02d}", year, month); }

YearMonth YearMonth::plus(int months) const {
    int total = year * 12 + static_cast<int>(month) - 1 + months;
    int y = total >= 0 ? total / 12 : (total - 11) / 12;
    return {y, static_cast<unsigned>(total - y * 12 + 1)};
}

Date YearMonth::first_day() const {
    using namespace std::chrono;
    return sys_days{std::chrono::year{year} / std::chrono::month{month} / 1};
}

Date YearMonth::last_day() const {
    using namespace std::chrono;
    return sys_days{std::chrono::year{year} / std::chrono::month{month} / std::chrono::last};
}

int YearMonth::index_from(YearMonth origin) const {
    return (year - origin.year) * 12 + static_cast<int>(month) - static_cast<int>(origin.month);
}

Date parse_date(std::string_view text) {
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') {
        throw std::invalid_argument(fmt::format("expected YYYY-MM-DD, got '{}'", text));
    }
    return make_date(read_int(text, 0, 4, text), read_int(text, 5, 2, text),
                     read_int(text, 8, 2, text), text);
}

std::string format_date(Date date) {
    std::chrono::year_month_day ymd{date};
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

Timestamp parse_timestamp(std::string_view text) {
    using namespace std::chrono;
    Date day = parse_date(text);
    if (text.size() == 10) {
        return Timestamp{day};
    }
    if (text[10] != 'T' && text[10] != ' ') {
        throw std::invalid_argument(fmt::format("malformed timestamp '{}'", text));
    }
    int hh = read_int(text, 11, 2, text);
    int mm = read_int(text, 14, 2, text);
    int ss = read_int(text, 17, 2, text);
    if (hh > 23 || mm > 59 || ss > 60) {
        throw std::invalid_argument(fmt::format("time of day out of range in '{}'", text));
    }
    std::size_t pos = 19;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    }
    seconds offset{0};
    if (pos < text.size()) {
        char zone = text[pos];
        if (zone == 'Z' || zone == 'z') {
            ++pos;
        } else if (zone == '+' || zone == '-') {
            int oh = read_int(text, pos + 1, 2, text);
            std::size_t mpos = pos + 3;
            if (mpos < text.size() && text[mpos] == ':') ++mpos;
            int om = read_int(text, mpos, 2, text);
            offset = hours{oh} + minutes{om};
            if (zone == '-') offset = -offset;
            pos = mpos + 2;
        }
    }
    if (pos != text.size()) {
        throw std::invalid_argument(fmt::format("trailing characters in timestamp '{}'", text));
    }
    return Timestamp{day} + hours{hh} + minutes{mm} + seconds{ss} - offset;
}

std::optional<Timestamp> try_parse_timestamp(std::string_view text) {
    try {
        return parse_timestamp(text);
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
}

std::string format_timestamp(Timestamp ts) {
    using namespace std::chrono;
    Date day = to_date(ts);
    auto rem = ts - Timestamp{day};
    auto h = duration_cast<hours>(rem);
    auto m = duration_cast<minutes>(rem - h);
    auto s = rem - h - m;
    return fmt::format("{}T{:02d}:{:02d}:{:02d}Z", format_date(day), h.count(), m.count(),
                       s.count());
}

}  // namespace mcpscope
