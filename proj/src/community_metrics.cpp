#include "commtraj/community_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

namespace commtraj {

CommunityDistribution community_distribution(std::span<const PostEvent> window) {
  std::map<std::string, std::size_t> counts;
  for (const auto& e : window) ++counts[e.community];
  CommunityDistribution d;
  const double n = static_cast<double>(window.size());
  for (const auto& [c, k] : counts) d.p[c] = static_cast<double>(k) / n;
  return d;
}

std::size_t unique_communities(std::span<const PostEvent> window) {
  std::set<std::string_view> seen;
  for (const auto& e : window) seen.insert(e.community);
  return seen.size();
}

std::size_t jumps(std::span<const PostEvent> window) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < window.size(); ++i)
    if (window[i].community != window[i - 1].community) ++n;
  return n;
}

double entropy(const CommunityDistribution& d) {
  double h = 0.0;
  for (const auto& [c, p] : d.p)
    if (p > 0.0) h -= p * std::log2(p);
  return h;
}

double gini_simpson(const CommunityDistribution& d) {
  double s = 0.0;
  for (const auto& [c, p] : d.p) s += p * p;
  return 1.0 - s;
}

std::size_t cumulative_new_communities(const UserTrajectory& trajectory, std::size_t x) {
  x = std::min(x, trajectory.size());
  return unique_communities(std::span<const PostEvent>(trajectory.events).first(x));
}

std::size_t cumulative_new_communities_percent(const UserTrajectory& trajectory, double percent) {
  const double raw = percent * static_cast<double>(trajectory.size()) / 100.0;
  // Guard against 10 * 30 / 100 landing a hair above 3.
  const auto x = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return cumulative_new_communities(trajectory, x);
}

std::optional<double> apparent_size(const PostEvent& post, const CommunityMonthIndex& stats) {
  const auto* s = find_stats(stats, post.community, month_of(post.ts));
  if (!s || s->post_count < 1) return std::nullopt;
  return std::log2(static_cast<double>(s->post_count));
}

std::optional<double> community_dissimilarity(std::string_view c1, std::string_view c2, const CommunityIndex& index,
                                              std::int64_t min_posts) {
  auto a = index.find(c1);
  auto b = index.find(c2);
  if (a == index.end() || b == index.end()) return std::nullopt;
  if (a->second.total_posts < min_posts || b->second.total_posts < min_posts) return std::nullopt;
  const auto& pa = a->second.posters;
  const auto& pb = b->second.posters;
  std::size_t inter = 0;
  auto ia = pa.begin();
  auto ib = pb.begin();
  while (ia != pa.end() && ib != pb.end()) {
    if (*ia < *ib) ++ia;
    else if (*ib < *ia) ++ib;
    else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  const std::size_t uni = pa.size() + pb.size() - inter;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

bool DissimilarityCache::eligible(std::string_view c) const {
  auto it = index_.find(c);
  return it != index_.end() && it->second.total_posts >= min_posts_;
}

std::optional<double> DissimilarityCache::operator()(std::string_view c1, std::string_view c2) const {
  std::pair<std::string, std::string> key{std::string(std::min(c1, c2)), std::string(std::max(c1, c2))};
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  auto value = community_dissimilarity(key.first, key.second, index_, min_posts_);
  std::lock_guard lock(mutex_);
  cache_.emplace(std::move(key), value);
  return value;
}

std::optional<double> window_dissimilarity(std::span<const PostEvent> window, const DissimilarityCache& dissim) {
  std::set<std::string_view> distinct;
  for (const auto& e : window)
    if (dissim.eligible(e.community)) distinct.insert(e.community);
  if (distinct.size() < 2) return std::nullopt;
  const std::vector<std::string_view> cs(distinct.begin(), distinct.end());
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    for (std::size_t j = i + 1; j < cs.size(); ++j) {
      sum += *dissim(cs[i], cs[j]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

}  // namespace commtraj
