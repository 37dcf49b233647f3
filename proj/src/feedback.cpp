#include "commtraj/feedback.hpp"

#include <cmath>

namespace commtraj {

std::optional<MonthQuantiles> month_quantiles(std::span<const std::int64_t> v) {
  if (v.empty()) return std::nullopt;
  MonthQuantiles q;
  q.n = v.size();
  const std::size_t n = v.size();
  if (n % 2 == 1) q.median = static_cast<double>(v[n / 2]);
  else q.median = (static_cast<double>(v[n / 2 - 1]) + static_cast<double>(v[n / 2])) / 2.0;
  // ceil(0.75 n) in integers: (3n + 3) / 4
  const std::size_t rank = (3 * n + 3) / 4;
  q.p75 = static_cast<double>(v[rank - 1]);
  return q;
}

std::optional<MonthQuantiles> month_quantiles(const CommunityMonthStats& stats) {
  return month_quantiles(stats.feedback_values);
}

std::optional<double> post_outperform(const PostEvent& post, const CommunityMonthIndex& stats, FeedbackQuantile q) {
  if (!post.feedback) return std::nullopt;
  const auto* s = find_stats(stats, post.community, month_of(post.ts));
  if (!s) return std::nullopt;
  const auto quantiles = month_quantiles(*s);
  if (!quantiles) return std::nullopt;
  return outperform(*post.feedback, q == FeedbackQuantile::Median ? quantiles->median : quantiles->p75);
}

SingleMultiPartition single_multi_partition(const UserTrajectory& trajectory) {
  std::map<std::string_view, std::size_t> counts;
  for (const auto& e : trajectory.events) ++counts[e.community];
  SingleMultiPartition out;
  for (const auto& [c, n] : counts) (n == 1 ? out.single : out.multi) += 1;
  return out;
}

FirstPostComparison first_post_feedback_comparison(const TrajectoryMap& trajectories, const CommunityMonthIndex& stats,
                                                   FeedbackQuantile q) {
  FirstPostComparison out;
  for (const auto& [user, traj] : trajectories) {
    std::map<std::string_view, std::size_t> counts;
    std::map<std::string_view, const PostEvent*> first;
    for (const auto& e : traj.events) {
      if (++counts[e.community] == 1) first[e.community] = &e;
    }
    double single_sum = 0.0, multi_sum = 0.0;
    std::size_t single_n = 0, multi_n = 0;
    for (const auto& [c, post] : first) {
      const auto indicator = post_outperform(*post, stats, q);
      if (!indicator) continue;
      if (counts[c] == 1) {
        single_sum += *indicator;
        ++single_n;
      } else {
        multi_sum += *indicator;
        ++multi_n;
      }
    }
    if (single_n == 0 || multi_n == 0) continue;
    out.pairs.push_back({user, single_sum / static_cast<double>(single_n), multi_sum / static_cast<double>(multi_n)});
  }
  if (out.pairs.empty()) return out;
  std::vector<double> single, multi;
  for (const auto& p : out.pairs) {
    single.push_back(p.single_mean);
    multi.push_back(p.multi_mean);
  }
  out.single_mean = stats::mean(single);
  out.multi_mean = stats::mean(multi);
  if (out.pairs.size() >= 2) out.t_test = stats::paired_t_test(multi, single);
  return out;
}

}  // namespace commtraj
