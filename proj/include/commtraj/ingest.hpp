#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "commtraj/types.hpp"

namespace commtraj {

inline constexpr std::string_view kEventsFormatV1 = "events-v1";

enum class ParseMode { Strict, Lenient };

struct Diagnostic {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct ParseOptions {
  ParseMode mode = ParseMode::Lenient;
  /// Dataset bounds; records outside [min_ts, max_ts) are malformed.
  std::optional<Timestamp> min_ts;
  std::optional<Timestamp> max_ts;
  /// Posts at or after the cutoff are dropped silently (not diagnostics).
  std::optional<Timestamp> cutoff;
};

struct ParseResult {
  std::vector<PostEvent> events;
  std::vector<Diagnostic> diagnostics;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads line-delimited records. Unknown formats always throw; malformed
/// lines throw in strict mode and are skipped with a diagnostic otherwise.
ParseResult parse_events(std::istream& in, std::string_view format, const ParseOptions& options = {});

/// Writes events-v1 records (timestamps as epoch seconds).
void write_events(std::ostream& out, std::span<const PostEvent> events);
void write_trajectories(std::ostream& out, const TrajectoryMap& trajectories);

/// Groups by user; each trajectory is stably sorted by timestamp.
TrajectoryMap build_trajectories(std::vector<PostEvent> events);

TrajectoryMap filter_min_posts(TrajectoryMap trajectories, std::size_t min_posts = 50);

/// Flattens trajectories back into one event list (user order, then time).
std::vector<PostEvent> flatten(const TrajectoryMap& trajectories);

struct CommunityMonthKey {
  std::string community;
  Month month;
  auto operator<=>(const CommunityMonthKey&) const = default;
};

struct CommunityMonthRef {
  std::string_view community;
  Month month;
};

struct CommunityMonthLess {
  using is_transparent = void;
  template <typename A, typename B>
  bool operator()(const A& a, const B& b) const {
    const int c = std::string_view(a.community).compare(std::string_view(b.community));
    if (c != 0) return c < 0;
    return a.month < b.month;
  }
};

struct CommunityMonthStats {
  std::string community_id;
  Month month;
  std::int64_t post_count = 0;
  bool has_tokens = false;
  std::unordered_map<std::string, std::int64_t> token_counts;
  std::int64_t total_tokens = 0;
  bool has_pos = false;
  std::unordered_map<std::string, std::int64_t> pos_counts;
  std::int64_t total_pos = 0;
  std::vector<std::int64_t> feedback_values;  // ascending

  void add(const PostEvent& e);
  /// Order-independent merge of integer aggregates; feedback stays sorted.
  void merge(const CommunityMonthStats& other);
};

using CommunityMonthIndex = std::map<CommunityMonthKey, CommunityMonthStats, CommunityMonthLess>;

const CommunityMonthStats* find_stats(const CommunityMonthIndex& index, std::string_view community, Month month);

/// Shards the input across `threads` workers and merges the partial counts.
CommunityMonthIndex build_community_month_stats(std::span<const PostEvent> events, unsigned threads = 1);
CommunityMonthIndex build_community_month_stats(const TrajectoryMap& trajectories, unsigned threads = 1);

struct CommunityUserIndex {
  std::string community_id;
  std::set<std::string> posters;
  std::int64_t total_posts = 0;
};

using CommunityIndex = std::map<std::string, CommunityUserIndex, std::less<>>;

CommunityIndex build_community_user_index(std::span<const PostEvent> events);
CommunityIndex build_community_user_index(const TrajectoryMap& trajectories);

/// Dataset-wide word and tag frequencies, summed over community-months.
std::unordered_map<std::string, std::int64_t> global_token_counts(const CommunityMonthIndex& index);
std::unordered_map<std::string, std::int64_t> global_pos_counts(const CommunityMonthIndex& index);

}  // namespace commtraj
