#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "commtraj/community_metrics.hpp"
#include "helpers.hpp"

using namespace commtraj;

namespace {

std::vector<PostEvent> window_of(const std::vector<std::string>& cs) { return testing::trajectory(cs).events; }

CommunityDistribution counts(const std::vector<int>& c) {
  CommunityDistribution d;
  int total = 0;
  for (int x : c) total += x;
  for (std::size_t i = 0; i < c.size(); ++i) d.p["c" + std::to_string(i)] = double(c[i]) / total;
  return d;
}

}  // namespace

TEST_CASE("unique communities and jumps") {
  CHECK(unique_communities(window_of(std::vector<std::string>(10, "A"))) == 1);
  CHECK(unique_communities(window_of({"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"})) == 10);
  CHECK(jumps(window_of(std::vector<std::string>(10, "A"))) == 0);
  CHECK(jumps(window_of({"A", "B", "A", "B", "A", "B", "A", "B", "A", "B"})) == 9);
  CHECK(jumps(window_of({"A", "A", "B", "B", "A"})) == 2);
}

TEST_CASE("entropy and gini-simpson") {
  CHECK(entropy(counts({10})) == 0.0);
  CHECK(entropy(counts({5, 5})) == doctest::Approx(1.0));
  // -(.3 log .3 + .4 log .4 + .2 log .2 + .1 log .1) in bits
  CHECK(entropy(counts({3, 4, 2, 1})) == doctest::Approx(1.846439344671).epsilon(1e-10));
  CHECK(gini_simpson(counts({10})) == 0.0);
  CHECK(gini_simpson(counts({5, 5})) == doctest::Approx(0.5));
  CHECK(gini_simpson(counts({3, 4, 2, 1})) == doctest::Approx(0.70));
}

TEST_CASE("cumulative new communities on the example Redditor") {
  // an example Redditor's first 50 subreddits
  const std::vector<std::string> list{
      "skyrim", "aww", "skyrim", "aww", "pics", "aww", "aww", "pics", "WTF", "aww", "pics", "WTF", "pokemontrades",
      "funny", "pokemontrades", "pics", "aww", "AskReddit", "pics", "pokemon", "fashion", "AskReddit", "aww",
      "Scotland", "fashion", "aww", "Scotland", "pics", "keto", "keto", "Fitness", "keto", "skyrim", "pokemon", "cats",
      "aww", "aww", "pokemon", "Scotland", "AskReddit", "fashion", "keto", "pokemon", "ketouk", "Scotland", "keto",
      "pics", "ketouk", "funny", "gamecollecting"};
  REQUIRE(list.size() == 50);
  const auto t = testing::trajectory(list);
  CHECK(cumulative_new_communities(t, 1) == 1);
  CHECK(cumulative_new_communities(t, 50) == 15);
  CHECK(cumulative_new_communities(t, 10) == 4);
  CHECK(cumulative_new_communities(t, 500) == 15);
  CHECK(cumulative_new_communities_percent(t, 1) == 1);    // ceil(0.5) = 1 post
  CHECK(cumulative_new_communities_percent(t, 20) == 4);   // first 10
  CHECK(cumulative_new_communities_percent(t, 100) == 15);
}

TEST_CASE("apparent size") {
  std::vector<PostEvent> ev;
  for (int i = 0; i < 1024; ++i) ev.push_back(testing::post("u" + std::to_string(i), 1372636800 + i, "big"));
  ev.push_back(testing::post("v", 1372636800, "small"));
  const auto idx = build_community_month_stats(ev);
  CHECK(*apparent_size(ev[0], idx) == doctest::Approx(10.0));
  CHECK(*apparent_size(ev.back(), idx) == 0.0);
  CHECK_FALSE(apparent_size(testing::post("v", 0, "small"), idx));
}

TEST_CASE("dissimilarity") {
  std::vector<PostEvent> ev{testing::post("u1", 0, "X"), testing::post("u2", 0, "X"), testing::post("u2", 0, "Y"),
                            testing::post("u3", 0, "Y"), testing::post("u1", 0, "Z"), testing::post("u2", 0, "Z"),
                            testing::post("u9", 0, "W")};
  const auto idx = build_community_user_index(ev);
  CHECK(*community_dissimilarity("X", "Y", idx, 1) == doctest::Approx(1.0 - 1.0 / 3.0));
  CHECK(*community_dissimilarity("X", "Z", idx, 1) == 0.0);
  CHECK(*community_dissimilarity("X", "W", idx, 1) == 1.0);
  CHECK(*community_dissimilarity("Y", "X", idx, 1) == *community_dissimilarity("X", "Y", idx, 1));
  CHECK_FALSE(community_dissimilarity("X", "W", idx, 2));  // W has one post
  CHECK_FALSE(community_dissimilarity("X", "nowhere", idx, 1));
  CHECK_FALSE(community_dissimilarity("X", "Y", idx));  // default threshold of 1000 posts

  const DissimilarityCache cache(idx, 2);
  CHECK_FALSE(window_dissimilarity(window_of({"X", "X", "W"}), cache));
  CHECK(*window_dissimilarity(window_of({"X", "Y", "X"}), cache) == doctest::Approx(2.0 / 3.0));
  // pairs XY = 2/3, XZ = 0, YZ = 2/3
  const double xyz = *window_dissimilarity(window_of({"X", "Y", "Z", "W"}), cache);
  CHECK(xyz == doctest::Approx(4.0 / 9.0));
  CHECK(*window_dissimilarity(window_of({"W", "Z", "Y", "X"}), cache) == doctest::Approx(xyz));
}

TEST_CASE("window invariants on random windows") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> k(1, 6), w(1, 20);
  for (int trial = 0; trial < 2000; ++trial) {
    const int size = w(rng), alphabet = k(rng);
    std::uniform_int_distribution<int> pick(0, alphabet - 1);
    std::vector<std::string> cs;
    for (int i = 0; i < size; ++i) cs.push_back(std::string(1, char('a' + pick(rng))));
    const auto win = window_of(cs);
    const auto u = unique_communities(win);
    const auto j = jumps(win);
    const auto d = community_distribution(win);
    CHECK(u - 1 <= j);
    CHECK(j <= win.size() - 1);
    CHECK(entropy(d) >= 0.0);
    CHECK(entropy(d) <= std::log2(double(u)) + 1e-12);
    CHECK(gini_simpson(d) >= 0.0);
    CHECK(gini_simpson(d) <= 1.0 - 1.0 / double(u) + 1e-12);
    CHECK((gini_simpson(d) == 0.0) == (u == 1));
  }
}
