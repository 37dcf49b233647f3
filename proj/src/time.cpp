#include "commtraj/types.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

namespace commtraj {

namespace {

using std::chrono::days;
using std::chrono::sys_days;
using std::chrono::year_month_day;

year_month_day civil(Timestamp ts, Timestamp& seconds_of_day) {
  Timestamp day = ts / kSecondsPerDay;
  seconds_of_day = ts % kSecondsPerDay;
  if (seconds_of_day < 0) {
    seconds_of_day += kSecondsPerDay;
    --day;
  }
  return year_month_day{sys_days{days{day}}};
}

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  auto first = s.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, out);
  return ec == std::errc{} && ptr == first + len;
}

}  // namespace

Month month_of(Timestamp ts) {
  Timestamp sod = 0;
  const auto ymd = civil(ts, sod);
  return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month())};
}

std::string to_string(const Month& m) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u", m.year, m.month);
  return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  if (text.empty()) return std::nullopt;
  // Plain epoch seconds.
  {
    Timestamp v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec == std::errc{} && ptr == text.data() + text.size()) return v;
  }
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  if (!read_int(text, 0, 4, y) || !read_int(text, 5, 2, mo) || !read_int(text, 8, 2, d))
    return std::nullopt;
  std::size_t pos = 10;
  if (pos < text.size() && (text[pos] == 'T' || text[pos] == ' ')) {
    if (!read_int(text, pos + 1, 2, h) || text.size() < pos + 9 || text[pos + 3] != ':' ||
        !read_int(text, pos + 4, 2, mi) || text[pos + 6] != ':' || !read_int(text, pos + 7, 2, sec))
      return std::nullopt;
    pos += 9;
    if (pos < text.size() && text[pos] == '.') {
      ++pos;
      while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    }
  }
  Timestamp offset = 0;
  if (pos < text.size()) {
    if (text[pos] == 'Z' && pos + 1 == text.size()) {
      ++pos;
    } else if ((text[pos] == '+' || text[pos] == '-') && text.size() == pos + 6 && text[pos + 3] == ':') {
      int oh = 0, om = 0;
      if (!read_int(text, pos + 1, 2, oh) || !read_int(text, pos + 4, 2, om)) return std::nullopt;
      offset = (oh * 3600 + om * 60) * (text[pos] == '+' ? 1 : -1);
      pos = text.size();
    } else {
      return std::nullopt;
    }
  }
  if (h > 23 || mi > 59 || sec > 60) return std::nullopt;
  const year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                           std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  const Timestamp day = sys_days{ymd}.time_since_epoch().count();
  return day * kSecondsPerDay + h * 3600 + mi * 60 + sec - offset;
}

std::string format_timestamp(Timestamp ts) {
  Timestamp sod = 0;
  const auto ymd = civil(ts, sod);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(sod / 3600), static_cast<int>(sod / 60 % 60), static_cast<int>(sod % 60));
  return buf;
}

Timestamp add_months(Timestamp ts, int months) {
  Timestamp sod = 0;
  const auto ymd = civil(ts, sod);
  auto target = std::chrono::year_month{ymd.year(), ymd.month()} + std::chrono::months{months};
  const auto last = std::chrono::year_month_day_last{target.year(), std::chrono::month_day_last{target.month()}};
  const auto d = std::min(ymd.day(), last.day());
  const year_month_day out{target.year(), target.month(), d};
  return sys_days{out}.time_since_epoch().count() * kSecondsPerDay + sod;
}

}  // namespace commtraj
