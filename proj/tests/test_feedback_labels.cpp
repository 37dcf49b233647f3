#include <doctest.h>

#include <sstream>

#include "commtraj/feedback.hpp"
#include "commtraj/labeling.hpp"
#include "helpers.hpp"

using namespace commtraj;

TEST_CASE("month quantiles") {
  const std::vector<std::int64_t> odd{1, 2, 3, 4, 5}, even{1, 2, 3, 10}, one{7};
  CHECK(month_quantiles(odd)->median == 3.0);
  CHECK(month_quantiles(odd)->p75 == 4.0);  // ceil(3.75) = 4th
  CHECK(month_quantiles(even)->median == 2.5);
  CHECK(month_quantiles(even)->p75 == 3.0);  // 3rd
  CHECK(month_quantiles(one)->median == 7.0);
  CHECK(month_quantiles(one)->p75 == 7.0);
  CHECK_FALSE(month_quantiles(std::span<const std::int64_t>{}));
}

TEST_CASE("outperform is strict") {
  CHECK(outperform(3, 3.0) == 0);
  CHECK(outperform(4, 3.0) == 1);
  CHECK(outperform(3, 2.5) == 1);
}

TEST_CASE("post outperform needs feedback") {
  std::vector<PostEvent> ev;
  for (int f : {1, 2, 3, 4, 5}) {
    ev.push_back(testing::post("u", 1356998400, "A"));
    ev.back().feedback = f;
  }
  ev.push_back(testing::post("u", 1356998400, "B"));
  const auto idx = build_community_month_stats(ev);
  CHECK(*post_outperform(ev[3], idx, FeedbackQuantile::Median) == 1.0);
  CHECK(*post_outperform(ev[2], idx, FeedbackQuantile::Median) == 0.0);
  CHECK(*post_outperform(ev[4], idx, FeedbackQuantile::P75) == 1.0);
  CHECK(*post_outperform(ev[3], idx, FeedbackQuantile::P75) == 0.0);
  CHECK_FALSE(post_outperform(ev[5], idx, FeedbackQuantile::Median));
}

TEST_CASE("single vs multi partition") {
  const auto t = testing::trajectory({"A", "B", "A", "C", "D", "D"});
  const auto p = single_multi_partition(t);
  CHECK(p.single == 2);
  CHECK(p.multi == 2);
}

TEST_CASE("first-post comparison excludes one-sided users") {
  // community months: A feedback {0, 10}, B {0, 10}, S {0, 10}
  TrajectoryMap trajs;
  auto add = [&](const std::string& user, const std::string& c, std::int64_t fb, Timestamp ts) {
    auto e = testing::post(user, 1356998400 + ts, c);
    e.feedback = fb;
    trajs[user].user_id = user;
    trajs[user].events.push_back(e);
  };
  add("x", "A", 10, 0);  // first post in A outperforms, A returned to
  add("x", "S", 0, 1);   // single post, below median
  add("x", "A", 0, 2);
  add("y", "B", 10, 0);  // only multi-post communities
  add("y", "B", 0, 1);
  add("z", "S", 10, 2);  // only single
  std::vector<PostEvent> all;
  for (const auto& [u, t] : trajs) all.insert(all.end(), t.events.begin(), t.events.end());
  const auto idx = build_community_month_stats(all);
  const auto r = first_post_feedback_comparison(trajs, idx);
  REQUIRE(r.pairs.size() == 1);
  CHECK(r.pairs[0].user == "x");
  CHECK(r.pairs[0].multi_mean == 1.0);
  CHECK(r.pairs[0].single_mean == 0.0);
  CHECK_FALSE(r.t_test);
}

namespace {

UserTrajectory timed(const std::vector<Timestamp>& ts) {
  UserTrajectory t;
  t.user_id = "u";
  for (auto x : ts) t.events.push_back(testing::post("u", x, "A"));
  return t;
}

}  // namespace

TEST_CASE("departing status") {
  LabelConfig cfg;
  cfg.sof = *parse_timestamp("2013-07-01");
  cfg.prefix_len = 3;
  CHECK(cfg.mid() == *parse_timestamp("2013-10-01"));
  CHECK(cfg.end() == *parse_timestamp("2014-01-01"));
  const Timestamp before = cfg.sof - 100, first = cfg.sof + 10, second = cfg.mid() + 10, late = cfg.end() + 10;
  CHECK(departing_status(timed({before, before, before}), cfg) == Status::Departing);
  CHECK(departing_status(timed({before, before, before, first, second}), cfg) == Status::Staying);
  CHECK(departing_status(timed({before, before, before, first}), cfg) == Status::Neither);
  CHECK(departing_status(timed({before, before, before, late}), cfg) == Status::Neither);
  CHECK_FALSE(departing_status(timed({before, before, first, second}), cfg));
  cfg.half_rule = HalfRule::FixedDays;
  CHECK(cfg.mid() == cfg.sof + 91 * kSecondsPerDay);
}

TEST_CASE("activity quartiles") {
  std::map<std::string, std::size_t> counts;
  for (int i = 0; i < 10; ++i) counts["u" + std::to_string(i)] = 50 + static_cast<std::size_t>(i);
  counts["short"] = 10;
  const auto q = activity_quartiles(counts, 50);
  CHECK(q.size() == 10);
  CHECK_FALSE(q.contains("short"));
  // 10 users: sizes 3,3,2,2
  CHECK(q.at("u0") == 1);
  CHECK(q.at("u2") == 1);
  CHECK(q.at("u3") == 2);
  CHECK(q.at("u6") == 3);
  CHECK(q.at("u8") == 4);
  CHECK(q.at("u9") == 4);
}

TEST_CASE("labels round trip") {
  std::map<std::string, UserLabel> labels;
  labels["a"] = {"a", Status::Departing, 1, 0};
  labels["b"] = {"b", std::nullopt, 3, 12};
  labels["c"] = {"c", Status::Neither, 4, 40};
  std::ostringstream out;
  write_labels(out, labels);
  std::istringstream in(out.str());
  const auto r = read_labels(in);
  REQUIRE(r.size() == 3);
  CHECK(r.at("a").status == Status::Departing);
  CHECK_FALSE(r.at("b").status);
  CHECK(r.at("b").future_post_count == 12);
  CHECK(r.at("c").quartile == 4);
  for (auto s : {Status::Departing, Status::Staying, Status::Neither}) CHECK(parse_status(to_string(s)) == s);
}
