#include "commtraj/ingest.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "commtraj/parallel.hpp"

namespace commtraj {

namespace {

using nlohmann::json;

std::optional<std::vector<std::string>> string_array(const json& j, const char* field, std::string& error) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_array()) {
    error = std::string("field '") + field + "' must be an array of strings";
    return std::nullopt;
  }
  std::vector<std::string> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_string()) {
      error = std::string("field '") + field + "' must contain only strings";
      return std::nullopt;
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::optional<PostEvent> parse_record(std::string_view line, const ParseOptions& options, std::string& error) {
  json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    error = "not a JSON object";
    return std::nullopt;
  }
  PostEvent e;
  auto user = j.find("user");
  if (user == j.end() || !user->is_string() || user->get_ref<const std::string&>().empty()) {
    error = "missing or invalid 'user'";
    return std::nullopt;
  }
  e.user = user->get<std::string>();

  auto community = j.find("community");
  if (community == j.end() || !community->is_string() || community->get_ref<const std::string&>().empty()) {
    error = "missing or invalid 'community'";
    return std::nullopt;
  }
  e.community = community->get<std::string>();

  auto ts = j.find("ts");
  std::optional<Timestamp> parsed;
  if (ts != j.end()) {
    if (ts->is_number_integer()) parsed = ts->get<Timestamp>();
    else if (ts->is_string()) parsed = parse_timestamp(ts->get_ref<const std::string&>());
  }
  if (!parsed) {
    error = "missing or unparseable 'ts'";
    return std::nullopt;
  }
  e.ts = *parsed;
  if ((options.min_ts && e.ts < *options.min_ts) || (options.max_ts && e.ts >= *options.max_ts)) {
    error = "timestamp outside dataset bounds";
    return std::nullopt;
  }

  e.tokens = string_array(j, "tokens", error);
  if (!error.empty()) return std::nullopt;
  e.pos_tags = string_array(j, "pos", error);
  if (!error.empty()) return std::nullopt;
  if (e.pos_tags && (!e.tokens || e.tokens->size() != e.pos_tags->size())) {
    error = "'pos' length does not match 'tokens' length";
    return std::nullopt;
  }

  auto fb = j.find("feedback");
  if (fb != j.end() && !fb->is_null()) {
    if (!fb->is_number_integer()) {
      error = "'feedback' must be an integer";
      return std::nullopt;
    }
    e.feedback = fb->get<std::int64_t>();
  }
  return e;
}

}  // namespace

ParseResult parse_events(std::istream& in, std::string_view format, const ParseOptions& options) {
  if (format != kEventsFormatV1) throw ParseError("unknown input format '" + std::string(format) + "'");
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string error;
    auto event = parse_record(line, options, error);
    if (!event) {
      if (options.mode == ParseMode::Strict)
        throw ParseError("line " + std::to_string(line_no) + ": " + error);
      result.diagnostics.push_back({line_no, std::move(error)});
      continue;
    }
    if (options.cutoff && event->ts >= *options.cutoff) continue;
    result.events.push_back(std::move(*event));
  }
  return result;
}

void write_events(std::ostream& out, std::span<const PostEvent> events) {
  for (const auto& e : events) {
    json j = json::object();
    j["user"] = e.user;
    j["ts"] = e.ts;
    j["community"] = e.community;
    if (e.tokens) j["tokens"] = *e.tokens;
    if (e.pos_tags) j["pos"] = *e.pos_tags;
    if (e.feedback) j["feedback"] = *e.feedback;
    out << j.dump() << '\n';
  }
}

void write_trajectories(std::ostream& out, const TrajectoryMap& trajectories) {
  for (const auto& [user, traj] : trajectories) write_events(out, traj.events);
}

TrajectoryMap build_trajectories(std::vector<PostEvent> events) {
  TrajectoryMap out;
  for (auto& e : events) {
    auto& traj = out[e.user];
    if (traj.user_id.empty()) traj.user_id = e.user;
    traj.events.push_back(std::move(e));
  }
  for (auto& [user, traj] : out) {
    std::stable_sort(traj.events.begin(), traj.events.end(),
                     [](const PostEvent& a, const PostEvent& b) { return a.ts < b.ts; });
  }
  return out;
}

TrajectoryMap filter_min_posts(TrajectoryMap trajectories, std::size_t min_posts) {
  std::erase_if(trajectories, [&](const auto& kv) { return kv.second.size() < min_posts; });
  return trajectories;
}

std::vector<PostEvent> flatten(const TrajectoryMap& trajectories) {
  std::vector<PostEvent> out;
  for (const auto& [user, traj] : trajectories) out.insert(out.end(), traj.events.begin(), traj.events.end());
  return out;
}

void CommunityMonthStats::add(const PostEvent& e) {
  ++post_count;
  if (e.tokens) {
    has_tokens = true;
    for (const auto& t : *e.tokens) ++token_counts[t];
    total_tokens += static_cast<std::int64_t>(e.tokens->size());
  }
  if (e.pos_tags) {
    has_pos = true;
    for (const auto& t : *e.pos_tags) ++pos_counts[t];
    total_pos += static_cast<std::int64_t>(e.pos_tags->size());
  }
  if (e.feedback) {
    auto pos = std::upper_bound(feedback_values.begin(), feedback_values.end(), *e.feedback);
    feedback_values.insert(pos, *e.feedback);
  }
}

void CommunityMonthStats::merge(const CommunityMonthStats& other) {
  post_count += other.post_count;
  has_tokens = has_tokens || other.has_tokens;
  for (const auto& [t, c] : other.token_counts) token_counts[t] += c;
  total_tokens += other.total_tokens;
  has_pos = has_pos || other.has_pos;
  for (const auto& [t, c] : other.pos_counts) pos_counts[t] += c;
  total_pos += other.total_pos;
  std::vector<std::int64_t> merged;
  merged.reserve(feedback_values.size() + other.feedback_values.size());
  std::merge(feedback_values.begin(), feedback_values.end(), other.feedback_values.begin(),
             other.feedback_values.end(), std::back_inserter(merged));
  feedback_values = std::move(merged);
}

const CommunityMonthStats* find_stats(const CommunityMonthIndex& index, std::string_view community, Month month) {
  auto it = index.find(CommunityMonthRef{community, month});
  return it == index.end() ? nullptr : &it->second;
}

namespace {

CommunityMonthIndex build_stats(const std::vector<const PostEvent*>& events, unsigned threads) {
  const std::size_t shards = std::max<std::size_t>(1, std::min<std::size_t>(threads, events.size()));
  std::vector<CommunityMonthIndex> partial(shards);
  parallel_for(shards, threads, [&](std::size_t s) {
    const std::size_t begin = events.size() * s / shards;
    const std::size_t end = events.size() * (s + 1) / shards;
    auto& idx = partial[s];
    for (std::size_t i = begin; i < end; ++i) {
      const auto& e = *events[i];
      const Month m = month_of(e.ts);
      auto it = idx.find(CommunityMonthRef{e.community, m});
      if (it == idx.end()) {
        it = idx.emplace(CommunityMonthKey{e.community, m}, CommunityMonthStats{}).first;
        it->second.community_id = e.community;
        it->second.month = m;
      }
      it->second.add(e);
    }
  });
  CommunityMonthIndex out = std::move(partial[0]);
  for (std::size_t s = 1; s < shards; ++s) {
    for (auto& [key, stats] : partial[s]) {
      auto it = out.find(key);
      if (it == out.end()) out.emplace(key, std::move(stats));
      else it->second.merge(stats);
    }
  }
  return out;
}

}  // namespace

CommunityMonthIndex build_community_month_stats(std::span<const PostEvent> events, unsigned threads) {
  std::vector<const PostEvent*> ptrs;
  ptrs.reserve(events.size());
  for (const auto& e : events) ptrs.push_back(&e);
  return build_stats(ptrs, threads);
}

CommunityMonthIndex build_community_month_stats(const TrajectoryMap& trajectories, unsigned threads) {
  std::vector<const PostEvent*> ptrs;
  for (const auto& [user, traj] : trajectories)
    for (const auto& e : traj.events) ptrs.push_back(&e);
  return build_stats(ptrs, threads);
}

CommunityIndex build_community_user_index(std::span<const PostEvent> events) {
  CommunityIndex out;
  for (const auto& e : events) {
    auto it = out.find(e.community);
    if (it == out.end()) {
      it = out.emplace(e.community, CommunityUserIndex{}).first;
      it->second.community_id = e.community;
    }
    it->second.posters.insert(e.user);
    ++it->second.total_posts;
  }
  return out;
}

CommunityIndex build_community_user_index(const TrajectoryMap& trajectories) {
  CommunityIndex out;
  for (const auto& [user, traj] : trajectories) {
    auto part = build_community_user_index(traj.events);
    for (auto& [c, entry] : part) {
      auto it = out.find(c);
      if (it == out.end()) {
        out.emplace(c, std::move(entry));
      } else {
        it->second.posters.merge(entry.posters);
        it->second.total_posts += entry.total_posts;
      }
    }
  }
  return out;
}

std::unordered_map<std::string, std::int64_t> global_token_counts(const CommunityMonthIndex& index) {
  std::unordered_map<std::string, std::int64_t> out;
  for (const auto& [key, stats] : index)
    for (const auto& [t, c] : stats.token_counts) out[t] += c;
  return out;
}

std::unordered_map<std::string, std::int64_t> global_pos_counts(const CommunityMonthIndex& index) {
  std::unordered_map<std::string, std::int64_t> out;
  for (const auto& [key, stats] : index)
    for (const auto& [t, c] : stats.pos_counts) out[t] += c;
  return out;
}

}  // namespace commtraj
