#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "commtraj/ingest.hpp"
#include "commtraj/language.hpp"
#include "commtraj/linear_model.hpp"

namespace commtraj {

/// One classification instance: a user's first posts in two communities.
/// `flipped` decides which side is presented first. Null-control triples
/// draw both sides from one community (community_a == community_b).
struct StyleTriple {
  std::string user_id;
  std::string community_a, community_b;  // a < b for real triples
  std::vector<PostEvent> posts_a, posts_b;
  bool flipped = false;
};

struct TripleOptions {
  std::size_t posts_per_side = 25;
  std::size_t max_per_user = 0;  // 0 = every pair
  std::uint64_t seed = 1;
};

/// Every unordered pair of communities in which the user has at least
/// posts_per_side posts, with a seeded orientation bit. Ordered by user, then
/// pair. With a cap, a seeded subset of each user's pairs is kept.
std::vector<StyleTriple> build_triples(const TrajectoryMap& trajectories, const TripleOptions& options = {});

/// Null control: for each user and each community holding at least twice
/// posts_per_side posts, the first 2 * posts_per_side posts there split at
/// random into two sides.
std::vector<StyleTriple> build_null_triples(const TrajectoryMap& trajectories, const TripleOptions& options = {});

struct StyleContext {
  const CommunityMonthIndex* stats = nullptr;
  const LanguageModelSet* models = nullptr;  // smoothed, over the chosen vocabulary
  std::size_t window = 5;
  /// Leave the user's own posts out of the community corpora; needs the
  /// trajectories to know what to remove.
  const TrajectoryMap* exclude_own = nullptr;
};

/// 2 sides x (posts / window) windows x 2 community models, in the order
/// side-major, then window, then model (a, b). Sides follow presentation
/// order. nullopt with `diagnostic` set when a needed model is missing.
std::optional<std::vector<double>> style_features(const StyleTriple& triple, const StyleContext& ctx,
                                                  std::string* diagnostic = nullptr);

struct StyleDataset {
  std::string vocabulary;
  std::vector<std::size_t> triple_index;  // into the source triples
  MatrixX<double> features;
  VectorX<double> labels;  // 1 = flipped
  std::vector<std::string> diagnostics;
};

StyleDataset build_style_dataset(const std::vector<StyleTriple>& triples, const StyleContext& ctx, unsigned threads = 1);

struct StyleConfig {
  std::size_t train_size = 2000;  // includes the development split
  std::size_t test_size = 500;
  double dev_share = 0.2;
  std::size_t trials = 10;
  std::uint64_t seed = 1;
  std::vector<double> c_grid{0.01, 0.1, 1, 10, 100};
  unsigned threads = 1;
};

struct StyleTrialRow {
  std::string vocabulary;
  std::size_t trial = 0;
  double accuracy = 0.0;
};

struct StyleSummaryRow {
  std::string vocabulary;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
  std::size_t triples = 0;
};

struct StyleResults {
  std::vector<StyleTrialRow> rows;
  std::vector<StyleSummaryRow> summary;
};

/// Accuracy of a class-balanced logistic model at recovering the orientation
/// bit, over random splits. Throws std::invalid_argument when every triple has
/// the same orientation and std::runtime_error when there are too few triples.
StyleResults run_style_experiment(const std::vector<StyleDataset>& datasets, const StyleConfig& config);

void write_style_results(std::ostream& out, const std::vector<StyleTrialRow>& rows);
void write_style_summary(std::ostream& out, const std::vector<StyleSummaryRow>& rows);

}  // namespace commtraj
