#include "commtraj/labeling.hpp"

#include <algorithm>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace commtraj {

Timestamp LabelConfig::mid() const {
  return half_rule == HalfRule::CalendarMonths ? add_months(sof, half_months) : sof + half_days * kSecondsPerDay;
}

Timestamp LabelConfig::end() const {
  return half_rule == HalfRule::CalendarMonths ? add_months(sof, 2 * half_months)
                                               : sof + 2 * half_days * kSecondsPerDay;
}

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Departing: return "departing";
    case Status::Staying: return "staying";
    case Status::Neither: return "neither";
  }
  return "neither";
}

std::optional<Status> parse_status(std::string_view s) {
  if (s == "departing") return Status::Departing;
  if (s == "staying") return Status::Staying;
  if (s == "neither") return Status::Neither;
  return std::nullopt;
}

std::optional<Status> departing_status(const UserTrajectory& trajectory, const LabelConfig& config) {
  std::size_t before = 0;
  bool first_half = false, second_half = false, after = false;
  const Timestamp mid = config.mid();
  const Timestamp end = config.end();
  for (const auto& e : trajectory.events) {
    if (e.ts < config.sof) {
      ++before;
      continue;
    }
    after = true;
    if (e.ts < mid) first_half = true;
    else if (e.ts < end) second_half = true;
  }
  if (before < config.prefix_len) return std::nullopt;
  if (!after) return Status::Departing;
  if (first_half && second_half) return Status::Staying;
  return Status::Neither;
}

std::map<std::string, int> activity_quartiles(const std::map<std::string, std::size_t>& post_counts,
                                              std::size_t prefix_len) {
  std::vector<std::pair<std::size_t, std::string>> ranked;
  for (const auto& [user, t] : post_counts)
    if (t >= prefix_len) ranked.emplace_back(t - prefix_len, user);
  std::sort(ranked.begin(), ranked.end());
  const std::size_t n = ranked.size();
  std::map<std::string, int> out;
  std::size_t pos = 0;
  for (int q = 1; q <= 4; ++q) {
    const std::size_t size = n / 4 + (static_cast<std::size_t>(q - 1) < n % 4 ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i, ++pos) out[ranked[pos].second] = q;
  }
  return out;
}

std::map<std::string, UserLabel> label_users(const TrajectoryMap& trajectories, const LabelConfig& config,
                                             bool restrict_quartiles) {
  std::map<std::string, UserLabel> out;
  std::map<std::string, std::size_t> counts;
  for (const auto& [user, traj] : trajectories) {
    if (traj.size() < config.prefix_len) continue;
    UserLabel label;
    label.user_id = user;
    label.status = departing_status(traj, config);
    label.future_post_count = traj.size() - config.prefix_len;
    if (!restrict_quartiles || (label.status && *label.status != Status::Neither)) counts[user] = traj.size();
    out.emplace(user, std::move(label));
  }
  for (const auto& [user, q] : activity_quartiles(counts, config.prefix_len)) out[user].quartile = q;
  return out;
}

void write_labels(std::ostream& out, const std::map<std::string, UserLabel>& labels) {
  out << "user,status,quartile,future_post_count\n";
  for (const auto& [user, l] : labels) {
    out << user << ',' << (l.status ? to_string(*l.status) : std::string_view("ineligible")) << ',' << l.quartile
        << ',' << l.future_post_count << '\n';
  }
}

std::map<std::string, UserLabel> read_labels(std::istream& in) {
  std::map<std::string, UserLabel> out;
  std::string line;
  std::getline(in, line);
  if (line != "user,status,quartile,future_post_count") throw std::runtime_error("unexpected labels header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string user, status, quartile, future;
    std::getline(ss, user, ',');
    std::getline(ss, status, ',');
    std::getline(ss, quartile, ',');
    std::getline(ss, future, ',');
    UserLabel l;
    l.user_id = user;
    l.status = parse_status(status);
    l.quartile = std::stoi(quartile);
    l.future_post_count = std::stoull(future);
    out.emplace(user, std::move(l));
  }
  return out;
}

}  // namespace commtraj
