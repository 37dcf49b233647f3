#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "commtraj/types.hpp"

namespace commtraj {

enum class HalfRule { CalendarMonths, FixedDays };

struct LabelConfig {
  Timestamp sof = 0;             // start of future
  int half_months = 3;           // each half of the horizon, calendar rule
  int half_days = 91;            // each half, fixed-day rule
  HalfRule half_rule = HalfRule::CalendarMonths;
  std::size_t prefix_len = 50;

  /// End of the first half and of the whole horizon.
  Timestamp mid() const;
  Timestamp end() const;
};

enum class Status { Departing, Staying, Neither };

std::string_view to_string(Status s);
std::optional<Status> parse_status(std::string_view s);

/// nullopt when the user made fewer than prefix_len posts before SOF.
std::optional<Status> departing_status(const UserTrajectory& trajectory, const LabelConfig& config);

/// Quartile 1..4 (4 = most active) by post count after the prefix. Users with
/// fewer than prefix_len posts are not assigned. Ties are ordered by user id
/// and the remainder goes to the lower quartiles.
std::map<std::string, int> activity_quartiles(const std::map<std::string, std::size_t>& post_counts,
                                              std::size_t prefix_len = 50);

struct UserLabel {
  std::string user_id;
  std::optional<Status> status;  // nullopt: ineligible for the departure task
  int quartile = 0;
  std::size_t future_post_count = 0;
};

/// Labels every user with T >= prefix_len. With `restrict_quartiles`, only
/// departing and staying users take part in the quartile split.
std::map<std::string, UserLabel> label_users(const TrajectoryMap& trajectories, const LabelConfig& config,
                                             bool restrict_quartiles = false);

void write_labels(std::ostream& out, const std::map<std::string, UserLabel>& labels);
std::map<std::string, UserLabel> read_labels(std::istream& in);

}  // namespace commtraj
