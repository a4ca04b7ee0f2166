#include "netregime/dates.hpp"

#include <chrono>
#include <cstdio>

#include "netregime/errors.hpp"

namespace netregime {

namespace {

std::chrono::sys_days to_sys_days(const Date& d) {
  using namespace std::chrono;
  return sys_days{year{d.year} / d.month / d.day};
}

}  // namespace

Date parse_date(std::string_view iso) {
  int y = 0, m = 0, dd = 0;
  char sep1 = 0, sep2 = 0, trail = 0;
  const std::string s(iso);
  const int got = std::sscanf(s.c_str(), "%d%c%d%c%d%c", &y, &sep1, &m, &sep2, &dd, &trail);
  if (got != 5 || sep1 != '-' || sep2 != '-') {
    throw ValidationError("bad date '" + s + "': expected YYYY-MM-DD");
  }
  using namespace std::chrono;
  const year_month_day ymd = year{y} / m / dd;
  if (!ymd.ok()) {
    throw ValidationError("bad date '" + s + "': no such calendar day");
  }
  return Date{y, m, dd};
}

std::string to_iso(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

long days_between(const Date& a, const Date& b) {
  return (to_sys_days(b) - to_sys_days(a)).count();
}

Date add_days(const Date& d, long days) {
  using namespace std::chrono;
  const year_month_day ymd{to_sys_days(d) + std::chrono::days{days}};
  return Date{static_cast<int>(ymd.year()), static_cast<int>(unsigned{ymd.month()}),
              static_cast<int>(unsigned{ymd.day()})};
}

}  // namespace netregime
