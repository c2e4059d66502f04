#pragma once

#include <charconv>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "breakscope/error.hpp"

namespace breakscope {

/// Calendar date at day resolution, stored as days since 1970-01-01 (proleptic Gregorian).
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(int days_since_epoch) : days_(days_since_epoch) {}

  static constexpr Date from_ymd(int y, unsigned m, unsigned d) {
    // Howard Hinnant's days_from_civil.
    y -= m <= 2 ? 1 : 0;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return Date(era * 146097 + static_cast<int>(doe) - 719468);
  }

  struct Ymd {
    int year;
    unsigned month;
    unsigned day;
  };

  constexpr Ymd ymd() const {
    const int z = days_ + 719468;
    const int era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int y = static_cast<int>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {y + (m <= 2 ? 1 : 0), m, d};
  }

  constexpr int days() const { return days_; }
  constexpr int year() const { return ymd().year; }

  /// Strict ISO-8601 calendar date "YYYY-MM-DD". Throws InvalidArgument otherwise.
  static Date parse(std::string_view text) {
    auto fail = [&]() -> Date {
      throw Error(ErrorCode::InvalidArgument, "not an ISO-8601 date: '" + std::string(text) + "'");
    };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return fail();
    int y = 0;
    unsigned m = 0, d = 0;
    auto num = [&](std::size_t pos, std::size_t len, auto& out) {
      auto [p, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
      return ec == std::errc() && p == text.data() + pos + len;
    };
    if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return fail();
    if (m < 1 || m > 12 || d < 1 || d > days_in_month(y, m)) return fail();
    return from_ymd(y, m, d);
  }

  std::string to_string() const {
    const auto [y, m, d] = ymd();
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y, m, d);
    return buf;
  }

  static constexpr unsigned days_in_month(int y, unsigned m) {
    constexpr unsigned table[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    return m == 2 && leap ? 29u : table[m - 1];
  }

  constexpr Date operator+(int days) const { return Date(days_ + days); }
  constexpr int operator-(Date other) const { return days_ - other.days_; }
  constexpr auto operator<=>(const Date&) const = default;

 private:
  int days_ = 0;
};

}  // namespace breakscope
