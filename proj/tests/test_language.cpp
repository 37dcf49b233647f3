#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "commtraj/language.hpp"
#include "helpers.hpp"

using namespace commtraj;

namespace {

CommunityMonthStats corpus(const std::vector<std::string>& tokens) {
  CommunityMonthStats s;
  s.community_id = "C";
  s.month = Month{2013, 1};
  PostEvent e = testing::post("u", 1356998400, "C");
  e.tokens = tokens;
  s.add(e);
  return s;
}

Vocabulary vocab(std::vector<std::string> words) {
  TokenCounts c;
  std::int64_t n = static_cast<std::int64_t>(words.size()) + 1;
  for (const auto& w : words) c[w] = n--;
  return build_top_k_vocabulary(c, words.size());
}

}  // namespace

TEST_CASE("top-k ranks by count, ties lexicographic") {
  const TokenCounts c{{"b", 5}, {"a", 5}, {"c", 9}, {"d", 1}};
  const auto v = build_top_k_vocabulary(c, 3);
  CHECK(v.ranked == std::vector<std::string>{"c", "a", "b"});
  CHECK(v.name == "top3");
  CHECK(v.extended_size() == 4);
  CHECK(build_full_vocabulary(c, 4).ranked.size() == 3);
  CHECK(build_full_vocabulary(c, 5).ranked.size() == 1);
}

TEST_CASE("vocabulary names") {
  CommunityMonthIndex idx;
  CHECK_THROWS_AS(build_vocabulary(idx, "bigram"), std::invalid_argument);
  CHECK_THROWS_AS(build_vocabulary(idx, "top0"), std::invalid_argument);
  CHECK_THROWS_AS(build_vocabulary(idx, "top100"), std::runtime_error);
  CHECK_THROWS_AS(build_vocabulary(idx, "pos"), std::runtime_error);
}

TEST_CASE("vocabulary file round trip") {
  const auto v = vocab({"the", "a", "of"});
  std::ostringstream out;
  write_vocabulary(out, v);
  std::istringstream in(out.str());
  const auto r = read_vocabulary(in, "top3");
  CHECK(r.ranked == v.ranked);
  CHECK(r.kind == VocabularyKind::TopK);
}

TEST_CASE("rare mapping") {
  const auto v = vocab({"a", "b"});
  const std::vector<std::string> t{"a", "zzz", "b", "q"};
  CHECK(map_rare(t, v) == std::vector<std::string>{"a", kRareToken, "b", kRareToken});
}

TEST_CASE("unsmoothed and smoothed probabilities") {
  const auto v = vocab({"a", "b", "c"});
  const auto s = corpus({"a", "a", "b", "x", "y", "a"});
  const MonthlyLanguageModel raw(s, v, Smoothing::None);
  CHECK(raw.probability("a") == doctest::Approx(3.0 / 6));
  CHECK(raw.probability("zzz") == doctest::Approx(2.0 / 6));
  CHECK(raw.probability("c") == 0.0);
  CHECK(raw.rare_count() == 2);
  const std::vector<std::string> bad{"c"};
  CHECK_THROWS_AS(cross_entropy(bad, raw), ZeroProbabilityError);

  // add 1/|V'| to each count, |V'| = 4
  const MonthlyLanguageModel sm(s, v, Smoothing::AddOneOverV);
  CHECK(sm.probability("a") == doctest::Approx(3.25 / 7));
  CHECK(sm.probability("c") == doctest::Approx(0.25 / 7));
  CHECK(sm.probability("x") == doctest::Approx(2.25 / 7));
}

TEST_CASE("cross-entropy hand example") {
  const auto v = vocab({"a", "b"});
  const auto s = corpus({"a", "a", "b"});
  const MonthlyLanguageModel m(s, v, Smoothing::None);
  const std::vector<std::string> post{"a", "b"};
  CHECK(*cross_entropy(post, m) == doctest::Approx((std::log2(1.5) + std::log2(3.0)) / 2).epsilon(1e-12));
  CHECK(*cross_entropy(post, m) == doctest::Approx(1.08496).epsilon(1e-5));
  CHECK_FALSE(cross_entropy(std::span<const std::string>{}, m));
}

TEST_CASE("excluding own counts") {
  const auto v = vocab({"a", "b"});
  const auto s = corpus({"a", "a", "b", "z"});
  const TokenCounts own{{"a", 1}, {"z", 1}};
  const MonthlyLanguageModel m(s, v, Smoothing::None, &own);
  CHECK(m.total() == 2);
  CHECK(m.probability("a") == doctest::Approx(0.5));
  CHECK(m.probability("q") == 0.0);
}

TEST_CASE("distribution properties on random corpora") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> word(0, 9), len(1, 40), vsize(1, 8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> words;
    for (int i = 0; i < vsize(rng); ++i) words.push_back("w" + std::to_string(i));
    const auto v = vocab(words);
    std::vector<std::string> p, q;
    for (int i = len(rng); i > 0; --i) p.push_back("w" + std::to_string(word(rng)));
    for (int i = len(rng); i > 0; --i) q.push_back("w" + std::to_string(word(rng)));
    const auto sp = corpus(p), sq = corpus(q);
    for (auto mode : {Smoothing::None, Smoothing::AddOneOverV}) {
      const MonthlyLanguageModel mp(sp, v, mode);
      double sum = 0.0;
      for (const auto& [t, pr] : mp.distribution()) {
        sum += pr;
        if (mode == Smoothing::AddOneOverV) CHECK(pr > 0.0);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      if (mode == Smoothing::None) CHECK(*cross_entropy(p, mp) == doctest::Approx(mp.entropy()).epsilon(1e-9));
    }
    // Gibbs: H(P, Q) >= H(P) for the smoothed Q
    const MonthlyLanguageModel mp(sp, v, Smoothing::None), mq(sq, v, Smoothing::AddOneOverV);
    CHECK(*cross_entropy(p, mq) >= mp.entropy() - 1e-12);
  }
}

TEST_CASE("pronoun rate") {
  const std::vector<std::string> t{"I", "think", "my", "ME", "dog", "Me"};
  // "ME" is an all-caps acronym and does not count
  CHECK(*pronoun_rate(t) == doctest::Approx(3.0 / 6));
  CHECK_FALSE(pronoun_rate(std::span<const std::string>{}));
  CHECK(post_length(t) == 6);
}

TEST_CASE("model set scores posts against their own month") {
  auto log = testing::random_log(30, 40, 21);
  const auto idx = build_community_month_stats(log);
  const auto v = build_vocabulary(idx, "top5");
  const auto pos = build_vocabulary(idx, "pos");
  const LanguageModelSet words(idx, v, Smoothing::AddOneOverV, 2), tags(idx, pos, Smoothing::AddOneOverV);
  for (const auto& e : log) {
    const auto ce = words.post_cross_entropy(e);
    CHECK(ce.has_value() == (e.tokens && !e.tokens->empty()));
    if (ce) {
      const MonthlyLanguageModel m(*find_stats(idx, e.community, month_of(e.ts)), v, Smoothing::AddOneOverV);
      CHECK(*ce == doctest::Approx(*cross_entropy(*e.tokens, m)).epsilon(1e-12));
    }
    CHECK(tags.post_cross_entropy(e).has_value() == (e.pos_tags && !e.pos_tags->empty()));
  }
}
