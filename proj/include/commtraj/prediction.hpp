#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "commtraj/ingest.hpp"
#include "commtraj/labeling.hpp"
#include "commtraj/language.hpp"
#include "commtraj/linear_model.hpp"

namespace commtraj {

enum class Family { TimeGap, SubInfo, Lang, Feedback };

std::string_view to_string(Family f);
std::optional<Family> parse_family(std::string_view s);

enum class Range { First, Last };

std::string_view to_string(Range r);

/// Everything feature extraction reads. Language model sets are listed in
/// feature order and must outlive the context.
struct FeatureContext {
  const CommunityMonthIndex* stats = nullptr;
  std::vector<const LanguageModelSet*> language;
  std::size_t window_size = 10;
  std::size_t prefix_len = 50;
  bool argmax_features = true;
  bool has_tokens = true;
  bool has_feedback = true;
  std::vector<std::string> pronouns = default_pronouns();
};

/// Index-level values for each post of a user's prefix (NaN = undefined).
struct PrefixMetrics {
  std::string user_id;
  std::vector<PostEvent> posts;  // the prefix
  std::vector<double> gap_days;
  std::vector<double> log_size;
  std::vector<std::vector<double>> cross_entropy;  // [vocab][post]
  std::vector<double> pronoun;
  std::vector<double> length;
  std::vector<double> outperform_median;
  std::vector<double> outperform_p75;
};

PrefixMetrics compute_prefix_metrics(const UserTrajectory& trajectory, const FeatureContext& ctx);

struct FeatureVector {
  std::string user_id;
  Range range = Range::First;
  std::size_t x = 50;
  std::vector<std::string> names;
  std::vector<Family> families;
  std::vector<double> values;  // NaN = missing
};

/// Features of the first or last x posts of the prefix (x a multiple of the
/// window size, at most prefix_len).
FeatureVector extract_features(const PrefixMetrics& prefix, const FeatureContext& ctx, Range range, std::size_t x);
FeatureVector extract_features(const UserTrajectory& trajectory, const FeatureContext& ctx, Range range, std::size_t x);

/// Feature vectors for many users sharing one column layout.
struct FeatureTable {
  Range range = Range::First;
  std::size_t x = 50;
  std::vector<std::string> users;
  std::vector<std::string> names;
  std::vector<Family> families;
  MatrixX<double> values;  // users x features, NaN = missing

  std::vector<Eigen::Index> columns_of(const std::vector<Family>& families) const;
  std::optional<std::size_t> row_of(const std::string& user) const;
};

FeatureTable make_table(const std::vector<FeatureVector>& vectors);
void write_feature_table(std::ostream& out, const FeatureTable& table);
FeatureTable read_feature_table(std::istream& in, Range range, std::size_t x);

/// Training-set statistics applied to every split: mean imputation of missing
/// values, a missing indicator for each column with training gaps, then the
/// [0,1] scaler.
struct Preprocessor {
  std::vector<Eigen::Index> columns;
  VectorX<double> impute;
  std::vector<Eigen::Index> indicator_columns;  // positions within `columns`
  MinMaxScaler<double> scaler;

  static Preprocessor fit(const MatrixX<double>& values, const std::vector<Eigen::Index>& rows,
                          const std::vector<Eigen::Index>& columns);
  MatrixX<double> transform(const MatrixX<double>& values, const std::vector<Eigen::Index>& rows) const;
};

/// Class-weighted logistic model with C chosen by validation F1 (ties keep
/// the earlier grid value), then refit on `train`.
struct FittedClassifier {
  Preprocessor pre;
  LinearModel<double> model;
  double regularization = 1.0;
  double validation_score = 0.0;
  bool converged = true;
};

FittedClassifier fit_departure_classifier(const MatrixX<double>& values, const std::vector<Eigen::Index>& columns,
                                          const std::vector<Eigen::Index>& train,
                                          const std::vector<Eigen::Index>& validation_fit,
                                          const std::vector<Eigen::Index>& validation,
                                          const VectorX<double>& positive, const std::vector<double>& grid);

struct FittedRegressor {
  Preprocessor pre;
  LinearModel<double> model;
  double regularization = 1.0;
  double epsilon = 0.1;
  double validation_score = 0.0;
  bool converged = true;
};

FittedRegressor fit_activity_regressor(const MatrixX<double>& values, const std::vector<Eigen::Index>& columns,
                                       const std::vector<Eigen::Index>& train,
                                       const std::vector<Eigen::Index>& validation_fit,
                                       const std::vector<Eigen::Index>& validation, const VectorX<double>& target,
                                       const std::vector<double>& grid, const std::vector<double>& epsilons);

/// Expected F1 of a predictor that ignores the features and labels a share
/// `predicted_rate` of users positive, when a share `positive_rate` is
/// positive: 2 pi q / (pi + q).
double chance_f1(double positive_rate, double predicted_rate);

/// log2(future posts), with log2(1 + n) when n = 0.
double activity_target(std::size_t future_posts);

struct FeatureSet {
  std::string name;
  std::vector<Family> families;
};

const std::vector<FeatureSet>& standard_feature_sets();

struct ProtocolConfig {
  std::size_t train_size = 2000;
  std::size_t test_size = 500;
  std::size_t validation_size = 500;
  std::size_t trials = 10;
  std::uint64_t seed = 1;
  std::vector<double> c_grid{0.01, 0.1, 1, 10, 100};
  std::vector<double> epsilon_grid{0.01, 0.1};
  std::size_t prefix_len = 50;  // x of the full-prefix tables
  std::vector<std::size_t> x_values{10, 20, 30, 40, 50};
  std::vector<std::string> feature_sets{"timegap", "subinfo", "lang", "feedback", "all"};
  bool departure = true;
  bool activity = true;
  bool sweeps = true;
  bool shuffled_control = true;
  unsigned threads = 1;

  /// key=value lines; '#' starts a comment. Unknown keys throw.
  static ProtocolConfig parse(std::istream& in);
};

struct ResultRow {
  std::size_t trial = 0;
  std::string task;         // departure | activity
  std::string feature_set;
  std::string range;        // first | last
  std::size_t x = 50;
  std::string metric;       // f1 | f1_chance | rmse
  double value = 0.0;
};

struct SummaryRow {
  std::string task, feature_set, range;
  std::size_t x = 50;
  std::string metric;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
  std::string compared_to;  // empty when no test applies
  std::optional<double> wilcoxon_p;  // exact signed-rank p up to 30 trials
};

struct TrialResults {
  std::vector<ResultRow> rows;        // ordered by trial, then configuration
  std::vector<SummaryRow> summary;
  std::vector<std::string> warnings;
};

/// Tables keyed by (range, x); the (first, prefix_len) table is required.
using FeatureTables = std::map<std::pair<Range, std::size_t>, FeatureTable>;

/// Runs the randomized trials. Throws std::runtime_error when there are too
/// few labeled users for the configured sizes.
TrialResults run_trial_protocol(const FeatureTables& tables, const std::map<std::string, UserLabel>& labels,
                                const ProtocolConfig& config);

void write_results(std::ostream& out, const std::vector<ResultRow>& rows);
void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace commtraj
