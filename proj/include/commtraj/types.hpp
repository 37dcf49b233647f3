#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace commtraj {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

constexpr Timestamp kSecondsPerDay = 86400;

/// UTC calendar month.
struct Month {
  int year = 1970;
  unsigned month = 1;  // 1..12

  auto operator<=>(const Month&) const = default;

  /// Months since 0000-01, handy for arithmetic and hashing.
  int serial() const { return year * 12 + static_cast<int>(month) - 1; }
};

Month month_of(Timestamp ts);
std::string to_string(const Month& m);

/// Parses either integer epoch seconds or ISO-8601 ("2013-07-01",
/// "2013-07-01T12:00:00Z", "2013-07-01 12:00:00+02:00").
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp ts);

/// Calendar-month arithmetic; the day of month is clamped to the target
/// month's length and the time of day is preserved.
Timestamp add_months(Timestamp ts, int months);

/// One contributed post.
struct PostEvent {
  std::string user;
  Timestamp ts = 0;
  std::string community;
  std::optional<std::vector<std::string>> tokens;
  std::optional<std::vector<std::string>> pos_tags;
  std::optional<std::int64_t> feedback;

  bool operator==(const PostEvent&) const = default;
};

/// A user's posts in ascending time order (ties keep input order).
struct UserTrajectory {
  std::string user_id;
  std::vector<PostEvent> events;

  std::size_t size() const { return events.size(); }
  bool operator==(const UserTrajectory&) const = default;
};

/// Keyed by user id; iteration order is the deterministic reduction order.
using TrajectoryMap = std::map<std::string, UserTrajectory>;

}  // namespace commtraj
