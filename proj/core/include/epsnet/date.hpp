// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace epsnet {

using Date = std::chrono::sys_days;

/// Parses YYYY-MM-DD. Throws DataError on malformed text or invalid dates.
Date parse_date(std::string_view text);
std::string format_date(Date d);

Date make_date(int y, unsigned m, unsigned d);
int year_of(Date d);

/// Calendar span in years (365.25-day years).
double years_between(Date from, Date to);

bool is_weekday(Date d);
/// First weekday on or after d.
Date roll_forward_to_weekday(Date d);

}  // namespace epsnet
