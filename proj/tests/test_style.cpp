#include <doctest.h>

#include <cmath>
#include <set>

#include "commtraj/pipeline.hpp"
#include "commtraj/style.hpp"
#include "commtraj/synth.hpp"
#include "helpers.hpp"

using namespace commtraj;

namespace {

UserTrajectory mixed() {
  std::vector<std::string> cs;
  for (int i = 0; i < 60; ++i) cs.push_back(i % 2 ? "A" : "B");
  for (int i = 0; i < 30; ++i) cs.push_back("C");
  for (int i = 0; i < 10; ++i) cs.push_back("D");
  return testing::trajectory(cs, "u");
}

}  // namespace

TEST_CASE("triples cover every eligible unordered pair") {
  TrajectoryMap t{{"u", mixed()}};
  const auto triples = build_triples(t);
  REQUIRE(triples.size() == 3);  // AB, AC, BC
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& tr : triples) {
    CHECK(tr.community_a < tr.community_b);
    CHECK(tr.posts_a.size() == 25);
    CHECK(tr.posts_b.size() == 25);
    for (const auto& p : tr.posts_a) CHECK(p.community == tr.community_a);
    pairs.insert({tr.community_a, tr.community_b});
  }
  CHECK(pairs.count({"A", "B"}) == 1);
  // the first 25 posts in A are posts 2, 4, ..., 50
  CHECK(triples[0].posts_a.front().ts == t["u"].events[1].ts);
  CHECK(triples[0].posts_a.back().ts == t["u"].events[49].ts);

  TripleOptions capped;
  capped.max_per_user = 2;
  CHECK(build_triples(t, capped).size() == 2);
}

TEST_CASE("orientation bits are seeded and mixed") {
  TrajectoryMap t;
  for (int u = 0; u < 200; ++u) {
    auto tr = mixed();
    tr.user_id = "u" + std::to_string(u);
    for (auto& e : tr.events) e.user = tr.user_id;
    t[tr.user_id] = tr;
  }
  const auto a = build_triples(t), b = build_triples(t);
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].flipped == b[i].flipped);
    flipped += a[i].flipped;
  }
  CHECK(flipped > a.size() / 3);
  CHECK(flipped < 2 * a.size() / 3);
}

TEST_CASE("null triples split one community's first posts") {
  std::vector<std::string> cs(70, "A");
  for (int i = 0; i < 49; ++i) cs.push_back("B");
  TrajectoryMap t{{"u", testing::trajectory(cs)}};
  const auto nulls = build_null_triples(t);
  REQUIRE(nulls.size() == 1);  // B has 49 < 50 posts
  const auto& n = nulls[0];
  CHECK(n.community_a == "A");
  CHECK(n.community_b == "A");
  REQUIRE(n.posts_a.size() == 25);
  REQUIRE(n.posts_b.size() == 25);
  std::set<Timestamp> seen;
  for (const auto* side : {&n.posts_a, &n.posts_b})
    for (const auto& p : *side) seen.insert(p.ts);
  std::set<Timestamp> first50;
  for (int i = 0; i < 50; ++i) first50.insert(t["u"].events[static_cast<std::size_t>(i)].ts);
  CHECK(seen == first50);
}

namespace {

struct StyleFixture {
  synth::Output out = synth::generate(synth::style_spec(150), 4);
  Dataset data = make_dataset(out.events);
  LanguageBundle language = build_language(data.stats, {"top100"});
  std::vector<StyleTriple> triples = build_triples(data.trajectories);
};

}  // namespace

TEST_CASE("style features: 20 values, sides in presentation order") {
  StyleFixture f;
  REQUIRE(f.triples.size() > 10);
  StyleContext ctx;
  ctx.stats = &f.data.stats;
  ctx.models = f.language.find("top100");
  auto tr = f.triples.front();
  tr.flipped = false;
  const auto straight = style_features(tr, ctx);
  tr.flipped = true;
  const auto swapped = style_features(tr, ctx);
  REQUIRE(straight);
  REQUIRE(swapped);
  REQUIRE(straight->size() == 20);
  for (std::size_t j = 0; j < 10; ++j) {
    CHECK((*straight)[j] == (*swapped)[j + 10]);
    CHECK((*straight)[j + 10] == (*swapped)[j]);
  }
  // first value: side a, window 1, community a model
  double sum = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto* model = ctx.models->find(tr.community_a, month_of(tr.posts_a[i].ts));
    REQUIRE(model);
    sum += *cross_entropy(*tr.posts_a[i].tokens, *model);
  }
  CHECK((*straight)[0] == doctest::Approx(sum / 5).epsilon(1e-12));
}

TEST_CASE("excluding own posts equals models built without the user") {
  StyleFixture f;
  const auto& tr = f.triples.front();
  std::vector<PostEvent> others;
  for (const auto& e : f.out.events)
    if (e.user != tr.user_id) others.push_back(e);
  const auto reduced = build_community_month_stats(others);
  const auto* vocab = &f.language.find("top100")->vocabulary();
  const LanguageModelSet held_out(reduced, *vocab, Smoothing::AddOneOverV);

  StyleContext ctx;
  ctx.stats = &f.data.stats;
  ctx.models = f.language.find("top100");
  ctx.exclude_own = &f.data.trajectories;
  const auto got = style_features(tr, ctx);
  REQUIRE(got);
  const auto& first = tr.flipped ? tr.posts_b : tr.posts_a;
  for (std::size_t m = 0; m < 2; ++m) {
    const auto& community = m == 0 ? tr.community_a : tr.community_b;
    double sum = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      const auto* model = held_out.find(community, month_of(first[i].ts));
      REQUIRE(model);
      sum += *cross_entropy(*first[i].tokens, *model);
    }
    CHECK((*got)[m] == doctest::Approx(sum / 5).epsilon(1e-12));
  }
}

TEST_CASE("style experiment refuses unrandomized orientation") {
  StyleFixture f;
  StyleContext ctx;
  ctx.stats = &f.data.stats;
  ctx.models = f.language.find("top100");
  auto fixed = f.triples;
  for (auto& t : fixed) t.flipped = false;
  StyleConfig cfg;
  cfg.train_size = 20;
  cfg.test_size = 5;
  cfg.trials = 2;
  CHECK_THROWS_AS(run_style_experiment({build_style_dataset(fixed, ctx)}, cfg), std::invalid_argument);
  const auto d = build_style_dataset(f.triples, ctx, 2);
  const auto r = run_style_experiment({d}, cfg);
  CHECK(r.rows.size() == 2);
  REQUIRE(r.summary.size() == 1);
  CHECK(r.summary[0].triples == d.labels.size());
  cfg.train_size = 100000;
  CHECK_THROWS_AS(run_style_experiment({d}, cfg), std::runtime_error);
}
