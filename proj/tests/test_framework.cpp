#include <doctest.h>

#include <cmath>

#include "commtraj/framework.hpp"
#include "helpers.hpp"

using namespace commtraj;

TEST_CASE("windows drop the remainder") {
  const auto w = windows(37, 10);
  REQUIRE(w.size() == 3);
  CHECK(w[0] == Window{1, 1, 10});
  CHECK(w[2] == Window{3, 21, 30});
  CHECK(windows(9, 10).empty());
}

TEST_CASE("stage assignment") {
  // 7 windows into 5 stages: boundaries floor(7s/5) = 1,2,4,5,7
  CHECK(stages(7, 5) == std::vector<std::size_t>{1, 2, 3, 3, 4, 5, 5});
  // T=150, w=10, S=5: three windows per stage, W_6 = posts 51..60
  const auto w = windows(150, 10);
  CHECK(w[5] == Window{6, 51, 60});
  CHECK(stages(w.size(), 5) == std::vector<std::size_t>{1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4, 5, 5, 5});
}

TEST_CASE("fewer windows than stages leaves stages empty") {
  const auto s = stages(3, 5);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] >= 1);
  CHECK(s.back() == 5);
}

TEST_CASE("window spec validation") {
  WindowSpec ok{10, FixedPrefix{50}};
  CHECK_NOTHROW(ok.validate());
  CHECK_THROWS_AS((WindowSpec{0, FixedPrefix{50}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((WindowSpec{10, FixedPrefix{55}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((WindowSpec{10, FullLife{0}}.validate()), std::invalid_argument);
}

TEST_CASE("fixed prefix vs full life") {
  std::vector<std::string> cs(73, "A");
  const auto traj = testing::trajectory(cs);
  auto count = on_window_events([](std::span<const PostEvent> w) -> MaybeValue { return double(w.size()); });
  CHECK(eval_window_function(traj, count, {10, FixedPrefix{50}}).values.size() == 5);
  CHECK(eval_window_function(traj, count, {10, FullLife{5}}).values.size() == 7);
  const auto short_traj = testing::trajectory(std::vector<std::string>(23, "A"));
  CHECK(eval_window_function(short_traj, count, {10, FixedPrefix{50}}).values.size() == 2);
}

TEST_CASE("window mean skips undefined indices") {
  const auto traj = testing::trajectory(std::vector<std::string>(10, "A"));
  auto f = window_mean([](std::span<const PostEvent>, std::size_t t) -> MaybeValue {
    if (t % 2 == 0) return std::nullopt;
    return double(t);
  });
  const auto s = eval_window_function(traj, f, {10, FixedPrefix{10}});
  REQUIRE(s.values.size() == 1);
  CHECK(*s.values[0].value == doctest::Approx(5.0));  // mean of 1,3,5,7,9
  auto none = window_mean([](std::span<const PostEvent>, std::size_t) -> MaybeValue { return std::nullopt; });
  CHECK_FALSE(eval_window_function(traj, none, {10, FixedPrefix{10}}).values[0].value);
}

TEST_CASE("stage view averages defined windows") {
  WindowSeries ws;
  ws.values = {{1, 1.0}, {2, std::nullopt}, {3, 3.0}, {4, 5.0}, {5, 7.0}, {6, 9.0}, {7, 11.0}};
  const auto s = eval_stage_view(ws, 5);
  REQUIRE(s.values.size() == 5);
  CHECK(*s.values[0].value == 1.0);
  CHECK_FALSE(s.values[1].value);  // window 2 only
  CHECK(*s.values[2].value == 4.0);  // windows 3,4
  CHECK(*s.values[4].value == 10.0);  // windows 6,7
}

TEST_CASE("population curve") {
  std::map<std::string, std::vector<SeriesPoint>> series{
      {"a", {{1, 1.0}, {2, 2.0}}}, {"b", {{1, 3.0}, {2, std::nullopt}}}, {"c", {{1, 100.0}}}};
  std::map<std::string, std::string> group{{"a", "g"}, {"b", "g"}};
  const auto curve = population_curve(series, group);
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].mean == 2.0);
  CHECK(curve[0].n == 2);
  CHECK(curve[0].stderr_ == doctest::Approx(1.0));  // sd sqrt(2), n 2
  CHECK(curve[1].n == 1);
  CHECK(curve[1].stderr_ == 0.0);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5, 123456789.125}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(2.0) == "2");
}
