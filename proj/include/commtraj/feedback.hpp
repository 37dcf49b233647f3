#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "commtraj/ingest.hpp"
#include "commtraj/stats.hpp"

namespace commtraj {

/// Feedback quantiles of one community-month.
struct MonthQuantiles {
  double median = 0.0;  // midpoint rule
  double p75 = 0.0;     // ceil(0.75 n)-th order statistic
  std::size_t n = 0;
};

/// nullopt when the community-month carries no feedback.
std::optional<MonthQuantiles> month_quantiles(const CommunityMonthStats& stats);
/// Same, over an ascending list.
std::optional<MonthQuantiles> month_quantiles(std::span<const std::int64_t> sorted_feedback);

enum class FeedbackQuantile { Median, P75 };

/// 1 iff the post's feedback is strictly above the chosen quantile.
inline int outperform(std::int64_t feedback, double threshold) { return static_cast<double>(feedback) > threshold; }

/// f(t) for one post; nullopt if the post has no feedback or its
/// community-month has no quantiles.
std::optional<double> post_outperform(const PostEvent& post, const CommunityMonthIndex& stats, FeedbackQuantile q);

struct SingleMultiPartition {
  std::size_t single = 0;  // communities posted to exactly once
  std::size_t multi = 0;   // communities posted to at least twice
};

SingleMultiPartition single_multi_partition(const UserTrajectory& trajectory);

struct FirstPostPair {
  std::string user;
  double single_mean = 0.0;  // mean indicator over first posts in single-post communities
  double multi_mean = 0.0;   // same for multi-post communities
};

struct FirstPostComparison {
  std::vector<FirstPostPair> pairs;  // ascending user id
  double single_mean = 0.0;
  double multi_mean = 0.0;
  std::optional<stats::PairedTTest> t_test;  // multi - single; needs >= 2 users
};

/// Compares how often users' first posts outperform the community-month median
/// in communities they later abandoned vs returned to. Communities whose first
/// post lacks feedback are ineligible; users lacking either side are excluded.
FirstPostComparison first_post_feedback_comparison(const TrajectoryMap& trajectories, const CommunityMonthIndex& stats,
                                                   FeedbackQuantile q = FeedbackQuantile::Median);

}  // namespace commtraj
