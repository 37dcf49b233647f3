#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "commtraj/ingest.hpp"

namespace commtraj {

/// Relative frequency of each community within a window.
struct CommunityDistribution {
  std::map<std::string, double> p;
};

CommunityDistribution community_distribution(std::span<const PostEvent> window);

std::size_t unique_communities(std::span<const PostEvent> window);

/// Adjacent within-window pairs whose communities differ.
std::size_t jumps(std::span<const PostEvent> window);

/// Shannon entropy in bits; 0 log 0 = 0.
double entropy(const CommunityDistribution& d);

/// 1 - sum p_c^2
double gini_simpson(const CommunityDistribution& d);

/// Distinct communities among the first x posts (x clamped to T).
std::size_t cumulative_new_communities(const UserTrajectory& trajectory, std::size_t x);
/// Same, over the first ceil(percent * T / 100) posts.
std::size_t cumulative_new_communities_percent(const UserTrajectory& trajectory, double percent);

/// log2 of the post's community-month post count; nullopt if the
/// community-month is absent from the index.
std::optional<double> apparent_size(const PostEvent& post, const CommunityMonthIndex& stats);

inline constexpr std::int64_t kDissimilarityMinPosts = 1000;

/// 1 - Jaccard(U_C1, U_C2). nullopt marks an inapplicable pair (either
/// community below the post threshold or absent).
std::optional<double> community_dissimilarity(std::string_view c1, std::string_view c2, const CommunityIndex& index,
                                              std::int64_t min_posts = kDissimilarityMinPosts);

/// Memoizes pairwise dissimilarities; safe to share across threads.
class DissimilarityCache {
 public:
  explicit DissimilarityCache(const CommunityIndex& index, std::int64_t min_posts = kDissimilarityMinPosts)
      : index_(index), min_posts_(min_posts) {}

  std::optional<double> operator()(std::string_view c1, std::string_view c2) const;
  bool eligible(std::string_view c) const;

 private:
  const CommunityIndex& index_;
  std::int64_t min_posts_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<std::string, std::string>, std::optional<double>> cache_;
};

/// Mean pairwise dissimilarity over the window's distinct eligible
/// communities; nullopt with fewer than two.
std::optional<double> window_dissimilarity(std::span<const PostEvent> window, const DissimilarityCache& dissim);

}  // namespace commtraj
