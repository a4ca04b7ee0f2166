#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace netregime {

/// Calendar date; always holds a valid proleptic Gregorian day.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;
};

/// Parses "YYYY-MM-DD". Throws ValidationError on malformed or impossible dates.
Date parse_date(std::string_view iso);

std::string to_iso(const Date& d);

/// Signed day count b - a.
long days_between(const Date& a, const Date& b);

Date add_days(const Date& d, long days);

/// Inclusive calendar window.
struct DateRange {
  Date start;
  Date end;

  bool contains(const Date& d) const { return start <= d && d <= end; }
};

}  // namespace netregime
