// SPDX-License-Identifier: Apache-2.0
#include "epsnet/date.hpp"

#include <charconv>
#include <cstdio>

#include "epsnet/error.hpp"

namespace epsnet {

namespace {

int parse_int(std::string_view s, std::string_view whole) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw DataError("invalid date '" + std::string(whole) + "'");
  return v;
}

}  // namespace

Date parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-')
    throw DataError("invalid date '" + std::string(text) + "' (want YYYY-MM-DD)");
  const int y = parse_int(text.substr(0, 4), text);
  const int m = parse_int(text.substr(5, 2), text);
  const int d = parse_int(text.substr(8, 2), text);
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month(static_cast<unsigned>(m)),
                                        std::chrono::day(static_cast<unsigned>(d))};
  if (!ymd.ok()) throw DataError("invalid date '" + std::string(text) + "'");
  return Date{ymd};
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

Date make_date(int y, unsigned m, unsigned d) {
  return Date{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}};
}

int year_of(Date d) { return static_cast<int>(std::chrono::year_month_day{d}.year()); }

double years_between(Date from, Date to) { return static_cast<double>((to - from).count()) / 365.25; }

bool is_weekday(Date d) {
  const unsigned wd = std::chrono::weekday{d}.c_encoding();
  return wd != 0 && wd != 6;
}

Date roll_forward_to_weekday(Date d) {
  while (!is_weekday(d)) d += std::chrono::days{1};
  return d;
}

}  // namespace epsnet
