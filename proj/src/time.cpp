#include "kubewatt/time.hpp"

#include <cinttypes>
#include <cstdio>
#include <thread>

#include "kubewatt/errors.hpp"

namespace kubewatt {

namespace {

// Civil-date conversions (days since 1970-01-01, proleptic Gregorian).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y += m <= 2;
}

}  // namespace

std::string format_iso8601(Instant t) {
  std::int64_t ms = unix_ms(t);
  std::int64_t sec = ms / 1000;
  std::int64_t frac = ms % 1000;
  if (frac < 0) {
    frac += 1000;
    sec -= 1;
  }
  std::int64_t days = sec / 86400;
  std::int64_t sod = sec % 86400;
  if (sod < 0) {
    sod += 86400;
    days -= 1;
  }
  std::int64_t year;
  unsigned month, day;
  civil_from_days(days, year, month, day);
  char buf[40];
  if (frac == 0) {
    std::snprintf(buf, sizeof(buf), "%04" PRId64 "-%02u-%02uT%02" PRId64 ":%02" PRId64 ":%02" PRId64 "Z",
                  year, month, day, sod / 3600, (sod / 60) % 60, sod % 60);
  } else {
    std::snprintf(buf, sizeof(buf),
                  "%04" PRId64 "-%02u-%02uT%02" PRId64 ":%02" PRId64 ":%02" PRId64 ".%03" PRId64 "Z",
                  year, month, day, sod / 3600, (sod / 60) % 60, sod % 60, frac);
  }
  return buf;
}

Instant parse_iso8601(const std::string& text) {
  int year = 0, month = 0, day = 0, hh = 0, mm = 0, ss = 0, consumed = 0;
  if (std::sscanf(text.c_str(), "%d-%d-%dT%d:%d:%d%n", &year, &month, &day, &hh, &mm, &ss,
                  &consumed) != 6) {
    throw Error(ErrorKind::ParseError, "bad timestamp '" + text + "'");
  }
  const char* p = text.c_str() + consumed;
  int ms = 0;
  if (*p == '.') {
    ++p;
    int digits = 0;
    while (*p >= '0' && *p <= '9') {
      if (digits < 3) ms = ms * 10 + (*p - '0');
      ++digits;
      ++p;
    }
    if (digits == 0) throw Error(ErrorKind::ParseError, "bad timestamp '" + text + "'");
    while (digits < 3) {
      ms *= 10;
      ++digits;
    }
  }
  if (*p != 'Z' || *(p + 1) != '\0' || month < 1 || month > 12 || day < 1 || day > 31 || hh > 23 ||
      mm > 59 || ss > 60) {
    throw Error(ErrorKind::ParseError, "bad timestamp '" + text + "'");
  }
  std::int64_t days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  std::int64_t total_ms = ((days * 86400 + hh * 3600 + mm * 60 + ss) * 1000) + ms;
  return instant_from_unix_ms(total_ms);
}

Instant WallClock::now() {
  return std::chrono::time_point_cast<Duration>(std::chrono::system_clock::now());
}

void WallClock::sleep_until(Instant t) { std::this_thread::sleep_until(t); }

VirtualClock::VirtualClock(Instant start, double speedup) : now_(start), speedup_(speedup) {
  if (speedup < 1.0) {
    throw Error(ErrorKind::ValidationError, "speedup must be >= 1");
  }
}

void VirtualClock::sleep_until(Instant t) {
  if (t <= now_) return;
  Duration dt = t - now_;
  now_ = t;
  owed_ += Duration{static_cast<std::int64_t>(static_cast<double>(dt.count()) / speedup_)};
  // Pay wall-clock debt in chunks; sub-20ms sleeps cost more in wakeups
  // than they buy in pacing fidelity.
  if (owed_ >= Duration{20}) {
    std::this_thread::sleep_for(owed_);
    owed_ = Duration{0};
  }
}

}  // namespace kubewatt
