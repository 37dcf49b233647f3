#pragma once

// In-memory analysis steps shared by the CLI stages and the acceptance
// harness.

#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "commtraj/community_metrics.hpp"
#include "commtraj/framework.hpp"
#include "commtraj/ingest.hpp"
#include "commtraj/labeling.hpp"
#include "commtraj/language.hpp"
#include "commtraj/prediction.hpp"

namespace commtraj {

struct Dataset {
  TrajectoryMap trajectories;
  CommunityMonthIndex stats;
  bool has_tokens = false;
  bool has_pos = false;
  bool has_feedback = false;
};

Dataset make_dataset(std::vector<PostEvent> events, unsigned threads = 1);

/// Vocabularies and smoothed monthly models, with stable addresses.
struct LanguageBundle {
  std::vector<std::unique_ptr<Vocabulary>> vocabularies;
  std::vector<std::unique_ptr<LanguageModelSet>> models;

  std::vector<const LanguageModelSet*> sets() const;
  const LanguageModelSet* find(const std::string& name) const;
};

/// Builds the named vocabularies that the data supports; names that cannot be
/// built (no tags, no tokens) are appended to `skipped`.
LanguageBundle build_language(const CommunityMonthIndex& stats, const std::vector<std::string>& names,
                              unsigned threads = 1, std::vector<std::string>* skipped = nullptr);

/// metric -> user -> points, with metrics kept in computation order.
struct SeriesTable {
  std::vector<std::string> metrics;
  std::map<std::string, std::map<std::string, std::vector<SeriesPoint>>> values;
};

struct MetricOptions {
  std::size_t window_size = 10;
  std::size_t prefix_len = 50;
  std::size_t stage_count = 5;
  std::int64_t dissim_min_posts = kDissimilarityMinPosts;
  std::vector<std::string> pronouns = default_pronouns();
  unsigned threads = 1;
};

struct MetricSeries {
  SeriesTable prefix;  // windows of the first prefix_len posts
  SeriesTable stage;   // full-life stages
};

/// Every metric the data supports for users with at least prefix_len posts.
/// Stage-view "cumnew" is the number of distinct communities within the first
/// 100 s / S percent of the user's posts.
MetricSeries compute_metric_series(const Dataset& data, const LanguageBundle& language, const MetricOptions& options);

/// Rows ordered by user, then metric.
void write_series_table(std::ostream& out, const SeriesTable& table, std::string_view x_kind);
SeriesTable read_series_table(std::istream& in);

struct FeatureOptions {
  std::size_t window_size = 10;
  std::size_t prefix_len = 50;
  std::vector<std::size_t> x_values{10, 20, 30, 40, 50};
  bool argmax_features = true;
  std::vector<std::string> pronouns = default_pronouns();
  unsigned threads = 1;
};

/// Tables for (first, x) and (last, x) over users with at least prefix_len
/// posts. The last-50 table is omitted since it equals first-50.
FeatureTables build_feature_tables(const Dataset& data, const LanguageBundle& language, const FeatureOptions& options);

std::string feature_table_filename(Range range, std::size_t x);

/// Groupings applied to population curves: "all", "status=<s>",
/// "quartile=<q>" and, when given, "archetype=<a>".
std::vector<std::map<std::string, std::string>> curve_groupings(const std::map<std::string, UserLabel>& labels,
                                                                 const std::map<std::string, std::string>& archetypes,
                                                                 const std::vector<std::string>& users);

/// Population curves for every metric of a table, skipping metrics whose
/// name appears in `exclude`.
void write_population_curves(std::ostream& out, const SeriesTable& table,
                             const std::vector<std::map<std::string, std::string>>& groupings,
                             const std::vector<std::string>& exclude = {});

/// Distinct communities among the first x posts for x = 1..max_posts, per
/// user with at least max_posts posts.
SeriesTable cumulative_exploration(const TrajectoryMap& trajectories, std::size_t max_posts);

}  // namespace commtraj
