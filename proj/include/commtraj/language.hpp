#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "commtraj/ingest.hpp"

namespace commtraj {

inline const std::string kRareToken = "<RARE>";

enum class VocabularyKind { PosTags, TopK, Full };

/// A restricted word (or tag) set V. The implicit extra token <RARE> is never
/// a member.
struct Vocabulary {
  VocabularyKind kind = VocabularyKind::TopK;
  std::string name;                  // "pos", "top100", ..., "full"
  std::vector<std::string> ranked;   // members, most frequent first
  std::unordered_set<std::string> members;

  bool contains(const std::string& token) const { return members.contains(token); }
  /// |V ∪ {<RARE>}|
  std::size_t extended_size() const { return members.size() + 1; }
};

using TokenCounts = std::unordered_map<std::string, std::int64_t>;

/// Most frequent k words; ties broken lexicographically.
Vocabulary build_top_k_vocabulary(const TokenCounts& counts, std::size_t k);
/// Words whose dataset count is strictly greater than `min_count`.
Vocabulary build_full_vocabulary(const TokenCounts& counts, std::int64_t min_count = 100);
/// Every tag in the inventory.
Vocabulary build_pos_vocabulary(const TokenCounts& tag_counts);

/// Builds from a name: "pos", "topK" (e.g. "top500") or "full". Throws
/// std::invalid_argument for unknown names and std::runtime_error when the
/// index holds no tokens (or no tags for "pos").
Vocabulary build_vocabulary(const CommunityMonthIndex& index, std::string_view name);

/// The vocabularies used as prediction features, in feature order.
const std::vector<std::string>& default_vocabulary_names();

/// One token per line, rank order.
void write_vocabulary(std::ostream& out, const Vocabulary& v);
Vocabulary read_vocabulary(std::istream& in, std::string_view name);

std::vector<std::string> map_rare(std::span<const std::string> tokens, const Vocabulary& v);

/// The units a vocabulary scores: POS tags for tag vocabularies, words otherwise.
const std::optional<std::vector<std::string>>& post_units(const PostEvent& post, const Vocabulary& v);

enum class Smoothing { None, AddOneOverV };

/// Relative-frequency distribution over V ∪ {<RARE>} for one community-month.
/// Holds a reference to the underlying counts; the index must outlive it.
class MonthlyLanguageModel {
 public:
  /// `excluded` (optional) holds counts to subtract from the corpus, used to
  /// leave a user's own posts out.
  MonthlyLanguageModel(const CommunityMonthStats& stats, const Vocabulary& vocab, Smoothing smoothing,
                       const TokenCounts* excluded = nullptr);

  /// False when the corpus is empty; probabilities are then undefined.
  bool available() const { return total_ > 0; }

  /// Probability of a raw token after <RARE> mapping.
  double probability(const std::string& token) const;

  /// Full distribution keyed by member token and <RARE>.
  std::map<std::string, double> distribution() const;

  double entropy() const;
  std::int64_t total() const { return total_; }
  std::int64_t rare_count() const { return rare_; }
  Smoothing smoothing() const { return smoothing_; }
  const Vocabulary& vocabulary() const { return *vocab_; }

 private:
  std::int64_t count(const std::string& member) const;

  const TokenCounts* counts_;
  const TokenCounts* excluded_;
  const Vocabulary* vocab_;
  Smoothing smoothing_;
  std::int64_t total_ = 0;
  std::int64_t rare_ = 0;
};

class ZeroProbabilityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Mean of -log2 p over token occurrences. nullopt for an empty sequence;
/// throws ZeroProbabilityError when an unsmoothed model assigns p = 0.
std::optional<double> cross_entropy(std::span<const std::string> tokens, const MonthlyLanguageModel& model);

/// Precomputed models for every community-month of an index under one
/// vocabulary. Immutable after construction.
class LanguageModelSet {
 public:
  LanguageModelSet(const CommunityMonthIndex& index, const Vocabulary& vocab, Smoothing smoothing, unsigned threads = 1);

  const MonthlyLanguageModel* find(std::string_view community, Month month) const;
  const Vocabulary& vocabulary() const { return *vocab_; }

  /// Cross-entropy of a post against its own community-month model.
  std::optional<double> post_cross_entropy(const PostEvent& post) const;

 private:
  const Vocabulary* vocab_;
  std::map<CommunityMonthKey, MonthlyLanguageModel, CommunityMonthLess> models_;
};

const std::vector<std::string>& default_pronouns();

/// Share of tokens that are first-person-singular pronouns (case-insensitive;
/// all-caps acronyms of two or more letters never match). nullopt if empty.
std::optional<double> pronoun_rate(std::span<const std::string> tokens,
                                   const std::vector<std::string>& lexicon = default_pronouns());

std::size_t post_length(std::span<const std::string> tokens);

}  // namespace commtraj
