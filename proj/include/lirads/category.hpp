#pragma once

#include <array>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "lirads/error.hpp"

namespace lirads {

/// US LI-RADS final assessment category covered by the pipeline.
enum class LiradsCategory : int { LR1 = 1, LR2 = 2, LR3 = 3 };

inline constexpr std::size_t kNumCategories = 3;
inline constexpr std::array<LiradsCategory, kNumCategories> kAllCategories = {
    LiradsCategory::LR1, LiradsCategory::LR2, LiradsCategory::LR3};

/// Zero-based index used for probability vectors and confusion matrices.
constexpr std::size_t category_index(LiradsCategory c) {
  return static_cast<std::size_t>(c) - 1;
}

constexpr LiradsCategory category_from_index(std::size_t i) {
  return static_cast<LiradsCategory>(static_cast<int>(i) + 1);
}

constexpr int category_number(LiradsCategory c) { return static_cast<int>(c); }

inline LiradsCategory category_from_number(int n) {
  if (n < 1 || n > 3) throw DataError("unsupported LI-RADS category");
  return static_cast<LiradsCategory>(n);
}

inline std::string category_name(LiradsCategory c) {
  return "LR" + std::to_string(category_number(c));
}

/// Calendar date, ISO-8601 on the wire.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  friend bool operator==(const Date&, const Date&) = default;
  friend auto operator<=>(const Date&, const Date&) = default;

  static constexpr bool is_leap(int y) {
    return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  }

  static constexpr int days_in_month(int y, int m) {
    constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return (m == 2 && is_leap(y)) ? 29 : kDays[m - 1];
  }

  bool valid() const {
    return year >= 1 && year <= 9999 && month >= 1 && month <= 12 &&
           day >= 1 && day <= days_in_month(year, month);
  }

  std::string iso() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
  }

  static Date parse_iso(std::string_view s) {
    auto digits = [&](std::size_t pos, std::size_t n) {
      int v = 0;
      for (std::size_t i = pos; i < pos + n; ++i) {
        if (s[i] < '0' || s[i] > '9') throw DataError("invalid ISO date: " + std::string(s));
        v = v * 10 + (s[i] - '0');
      }
      return v;
    };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-')
      throw DataError("invalid ISO date: " + std::string(s));
    Date d{digits(0, 4), digits(5, 2), digits(8, 2)};
    if (!d.valid()) throw DataError("invalid ISO date: " + std::string(s));
    return d;
  }
};

}  // namespace lirads
