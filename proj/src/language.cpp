#include "commtraj/language.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "commtraj/parallel.hpp"

namespace commtraj {

namespace {

std::vector<std::pair<std::string, std::int64_t>> by_frequency(const TokenCounts& counts) {
  std::vector<std::pair<std::string, std::int64_t>> items(counts.begin(), counts.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return items;
}

Vocabulary make(VocabularyKind kind, std::string name, std::vector<std::string> ranked) {
  Vocabulary v;
  v.kind = kind;
  v.name = std::move(name);
  v.ranked = std::move(ranked);
  std::erase(v.ranked, kRareToken);
  v.members.insert(v.ranked.begin(), v.ranked.end());
  return v;
}

const std::optional<std::vector<std::string>> kNoUnits;

}  // namespace

Vocabulary build_top_k_vocabulary(const TokenCounts& counts, std::size_t k) {
  std::vector<std::string> ranked;
  for (auto& [t, c] : by_frequency(counts)) {
    if (ranked.size() == k) break;
    if (t != kRareToken) ranked.push_back(t);
  }
  return make(VocabularyKind::TopK, "top" + std::to_string(k), std::move(ranked));
}

Vocabulary build_full_vocabulary(const TokenCounts& counts, std::int64_t min_count) {
  std::vector<std::string> ranked;
  for (auto& [t, c] : by_frequency(counts))
    if (c > min_count) ranked.push_back(t);
  return make(VocabularyKind::Full, "full", std::move(ranked));
}

Vocabulary build_pos_vocabulary(const TokenCounts& tag_counts) {
  std::vector<std::string> ranked;
  for (auto& [t, c] : by_frequency(tag_counts)) ranked.push_back(t);
  return make(VocabularyKind::PosTags, "pos", std::move(ranked));
}

Vocabulary build_vocabulary(const CommunityMonthIndex& index, std::string_view name) {
  if (name == "pos") {
    auto counts = global_pos_counts(index);
    if (counts.empty()) throw std::runtime_error("no part-of-speech tags were ingested; cannot build 'pos' vocabulary");
    return build_pos_vocabulary(counts);
  }
  std::optional<std::size_t> k;
  if (name.starts_with("top")) {
    std::size_t v = 0;
    auto digits = name.substr(3);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || v == 0)
      throw std::invalid_argument("bad vocabulary name '" + std::string(name) + "'");
    k = v;
  } else if (name != "full") {
    throw std::invalid_argument("unknown vocabulary '" + std::string(name) + "'");
  }
  auto counts = global_token_counts(index);
  if (counts.empty())
    throw std::runtime_error("no tokens were ingested; cannot build word vocabulary '" + std::string(name) + "'");
  return k ? build_top_k_vocabulary(counts, *k) : build_full_vocabulary(counts);
}

const std::vector<std::string>& default_vocabulary_names() {
  static const std::vector<std::string> names{"pos", "top100", "top500", "top1000", "top5000", "top10000", "full"};
  return names;
}

void write_vocabulary(std::ostream& out, const Vocabulary& v) {
  for (const auto& t : v.ranked) out << t << '\n';
}

Vocabulary read_vocabulary(std::istream& in, std::string_view name) {
  std::vector<std::string> ranked;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ranked.push_back(line);
  const auto kind = name == "pos" ? VocabularyKind::PosTags
                    : name == "full" ? VocabularyKind::Full
                                     : VocabularyKind::TopK;
  return make(kind, std::string(name), std::move(ranked));
}

std::vector<std::string> map_rare(std::span<const std::string> tokens, const Vocabulary& v) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(v.contains(t) ? t : kRareToken);
  return out;
}

const std::optional<std::vector<std::string>>& post_units(const PostEvent& post, const Vocabulary& v) {
  if (v.kind == VocabularyKind::PosTags) return post.pos_tags ? post.pos_tags : kNoUnits;
  return post.tokens;
}

MonthlyLanguageModel::MonthlyLanguageModel(const CommunityMonthStats& stats, const Vocabulary& vocab,
                                           Smoothing smoothing, const TokenCounts* excluded)
    : counts_(vocab.kind == VocabularyKind::PosTags ? &stats.pos_counts : &stats.token_counts),
      excluded_(excluded),
      vocab_(&vocab),
      smoothing_(smoothing) {
  std::int64_t in_vocab = 0;
  std::int64_t total = vocab.kind == VocabularyKind::PosTags ? stats.total_pos : stats.total_tokens;
  for (const auto& [t, c] : *counts_)
    if (vocab.contains(t)) in_vocab += c;
  if (excluded_) {
    for (const auto& [t, c] : *excluded_) {
      total -= c;
      if (vocab.contains(t)) in_vocab -= c;
    }
  }
  total_ = total;
  rare_ = total - in_vocab;
}

std::int64_t MonthlyLanguageModel::count(const std::string& member) const {
  std::int64_t c = 0;
  if (auto it = counts_->find(member); it != counts_->end()) c = it->second;
  if (excluded_)
    if (auto it = excluded_->find(member); it != excluded_->end()) c -= it->second;
  return c;
}

double MonthlyLanguageModel::probability(const std::string& token) const {
  const std::int64_t c = vocab_->contains(token) ? count(token) : rare_;
  if (smoothing_ == Smoothing::None) return total_ > 0 ? static_cast<double>(c) / static_cast<double>(total_) : 0.0;
  const double pseudo = 1.0 / static_cast<double>(vocab_->extended_size());
  return (static_cast<double>(c) + pseudo) / (static_cast<double>(total_) + 1.0);
}

std::map<std::string, double> MonthlyLanguageModel::distribution() const {
  std::map<std::string, double> out;
  for (const auto& t : vocab_->ranked) out[t] = probability(t);
  out[kRareToken] = probability(kRareToken);
  return out;
}

double MonthlyLanguageModel::entropy() const {
  double h = 0.0;
  for (const auto& [t, p] : distribution())
    if (p > 0.0) h -= p * std::log2(p);
  return h;
}

std::optional<double> cross_entropy(std::span<const std::string> tokens, const MonthlyLanguageModel& model) {
  if (tokens.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& t : tokens) {
    const double p = model.probability(t);
    if (!(p > 0.0)) throw ZeroProbabilityError("token '" + t + "' has zero probability under the model");
    sum -= std::log2(p);
  }
  return sum / static_cast<double>(tokens.size());
}

LanguageModelSet::LanguageModelSet(const CommunityMonthIndex& index, const Vocabulary& vocab, Smoothing smoothing,
                                   unsigned threads)
    : vocab_(&vocab) {
  std::vector<const std::pair<const CommunityMonthKey, CommunityMonthStats>*> entries;
  for (const auto& kv : index) entries.push_back(&kv);
  std::vector<std::optional<MonthlyLanguageModel>> built(entries.size());
  parallel_for(entries.size(), threads,
               [&](std::size_t i) { built[i].emplace(entries[i]->second, vocab, smoothing); });
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (built[i]->available()) models_.emplace(entries[i]->first, std::move(*built[i]));
}

const MonthlyLanguageModel* LanguageModelSet::find(std::string_view community, Month month) const {
  auto it = models_.find(CommunityMonthRef{community, month});
  return it == models_.end() ? nullptr : &it->second;
}

std::optional<double> LanguageModelSet::post_cross_entropy(const PostEvent& post) const {
  const auto& units = post_units(post, *vocab_);
  if (!units || units->empty()) return std::nullopt;
  const auto* model = find(post.community, month_of(post.ts));
  if (!model) return std::nullopt;
  return cross_entropy(*units, *model);
}

const std::vector<std::string>& default_pronouns() {
  static const std::vector<std::string> lexicon{"i", "me", "my", "mine", "myself"};
  return lexicon;
}

std::optional<double> pronoun_rate(std::span<const std::string> tokens, const std::vector<std::string>& lexicon) {
  if (tokens.empty()) return std::nullopt;
  std::size_t hits = 0;
  for (const auto& t : tokens) {
    std::size_t letters = 0;
    bool all_upper = true;
    std::string lower;
    lower.reserve(t.size());
    for (unsigned char ch : t) {
      if (std::isalpha(ch)) {
        ++letters;
        all_upper = all_upper && std::isupper(ch);
      }
      lower.push_back(static_cast<char>(std::tolower(ch)));
    }
    if (letters >= 2 && all_upper) continue;
    if (std::find(lexicon.begin(), lexicon.end(), lower) != lexicon.end()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(tokens.size());
}

std::size_t post_length(std::span<const std::string> tokens) { return tokens.size(); }

}  // namespace commtraj
