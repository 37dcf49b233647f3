#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "commtraj/pipeline.hpp"
#include "commtraj/prediction.hpp"
#include "commtraj/synth.hpp"
#include "helpers.hpp"

using namespace commtraj;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

FeatureContext bare_context() {
  FeatureContext ctx;
  ctx.has_tokens = false;
  ctx.has_feedback = false;
  return ctx;
}

}  // namespace

TEST_CASE("feature layout") {
  const auto traj = testing::trajectory(std::vector<std::string>(50, "A"));
  auto ctx = bare_context();
  const auto f = extract_features(traj, ctx, Range::First, 50);
  std::size_t timegap = 0, subinfo = 0;
  for (auto fam : f.families) (fam == Family::TimeGap ? timegap : subinfo) += 1;
  // 5 windows + argmax + argmin per series, plus whole-range summaries
  CHECK(timegap == 7 + 1);
  CHECK(subinfo == 5 * 7 + 3);
  CHECK(f.names[0] == "timegap:gap:w1");
  CHECK(f.names[5] == "timegap:gap:argmax");
  ctx.argmax_features = false;
  CHECK(extract_features(traj, ctx, Range::First, 20).values.size() == 1 + 2 + 5 * 2 + 3);
  CHECK_THROWS_AS(extract_features(traj, ctx, Range::First, 25), std::invalid_argument);
  CHECK_THROWS_AS(extract_features(testing::trajectory({"A"}), ctx, Range::First, 10), std::invalid_argument);
}

TEST_CASE("first and last ranges read the right windows") {
  std::vector<std::string> cs;
  for (int i = 0; i < 50; ++i) cs.push_back(i < 40 ? "A" : "c" + std::to_string(i % 5));
  const auto traj = testing::trajectory(cs);
  const auto ctx = bare_context();
  auto value = [](const FeatureVector& f, const std::string& name) {
    for (std::size_t j = 0; j < f.names.size(); ++j)
      if (f.names[j] == name) return f.values[j];
    FAIL("no column " << name);
    return 0.0;
  };
  const auto first = extract_features(traj, ctx, Range::First, 10);
  const auto last = extract_features(traj, ctx, Range::Last, 10);
  CHECK(value(first, "subinfo:uniq:w1") == 1.0);
  CHECK(value(last, "subinfo:uniq:w1") == 5.0);
  CHECK(value(last, "subinfo:uniq:all") == 5.0);
  // hourly posts; the first post has no gap
  CHECK(value(first, "timegap:gap:w1") == doctest::Approx(1.0 / 24));
  const auto full = extract_features(traj, ctx, Range::First, 50);
  CHECK(value(full, "subinfo:uniq:argmax") == 5.0);
  CHECK(value(full, "subinfo:uniq:argmin") == 1.0);
  CHECK(value(full, "subinfo:uniq:all") == 6.0);
}

TEST_CASE("feature table io keeps NaN and sorts users") {
  FeatureVector a{"zed", Range::First, 10, {"timegap:gap:w1", "subinfo:uniq:w1"}, {Family::TimeGap, Family::SubInfo},
                  {kNaN, 2.0}};
  FeatureVector b{"amy", Range::First, 10, a.names, a.families, {0.5, 1.0 / 3}};
  const auto t = make_table({a, b});
  CHECK(t.users == std::vector<std::string>{"amy", "zed"});
  CHECK(t.row_of("zed") == 1);
  CHECK_FALSE(t.row_of("bob"));
  CHECK(t.columns_of({Family::SubInfo}) == std::vector<Eigen::Index>{1});
  std::ostringstream out;
  write_feature_table(out, t);
  std::istringstream in(out.str());
  const auto r = read_feature_table(in, Range::First, 10);
  CHECK(r.names == t.names);
  CHECK(r.families == t.families);
  CHECK(std::isnan(r.values(1, 0)));
  CHECK(r.values(0, 1) == 1.0 / 3);
  FeatureVector c = b;
  c.names[0] = "timegap:gap:w2";
  CHECK_THROWS_AS(make_table({a, c}), std::invalid_argument);
}

TEST_CASE("min-max scaler") {
  MatrixX<double> X(3, 2);
  X << 1, 5, 3, 5, 2, 5;
  const auto s = MinMaxScaler<double>::fit(X);
  const auto T = s.transform(X);
  CHECK(T(0, 0) == 0.0);
  CHECK(T(1, 0) == 1.0);
  CHECK(T(2, 0) == 0.5);
  CHECK(T.col(1).isZero());
  MatrixX<double> Y(1, 2);
  Y << 5, 9;
  CHECK(s.transform(Y)(0, 0) == 2.0);  // not clipped
}

TEST_CASE("preprocessor imputes with training means and flags gaps") {
  MatrixX<double> V(4, 2);
  V << 1, 10, kNaN, 20, 3, 30, kNaN, kNaN;
  const std::vector<Eigen::Index> train{0, 1, 2}, cols{0, 1};
  const auto p = Preprocessor::fit(V, train, cols);
  CHECK(p.impute(0) == 2.0);
  CHECK(p.indicator_columns == std::vector<Eigen::Index>{0});
  const auto T = p.transform(V, {3});
  REQUIRE(T.cols() == 3);
  CHECK(T(0, 0) == 0.5);   // imputed 2 within [1,3]
  CHECK(T(0, 1) == 0.5);   // imputed 20 within [10,30]
  CHECK(T(0, 2) == 1.0);   // missing flag
}

TEST_CASE("F1 and baselines") {
  VectorX<double> p(6), y(6);
  p << 1, 1, 1, 0, 0, 0;
  y << 1, 1, 0, 1, 0, 0;
  CHECK(f1_score(p, y) == doctest::Approx(2.0 / 3));
  CHECK(f1_score(VectorX<double>::Zero(6), y) == 0.0);
  CHECK(chance_f1(0.5, 1.0) == doctest::Approx(2.0 / 3));  // always positive at pi = 0.5
  CHECK(chance_f1(0.3, 0.3) == doctest::Approx(0.3));
  CHECK(activity_target(0) == 0.0);
  CHECK(activity_target(7) == doctest::Approx(std::log2(7.0)));
  CHECK(rmse(p, y) == doctest::Approx(std::sqrt(2.0 / 6)));
}

TEST_CASE("logistic fit satisfies its optimality conditions") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const int n = 200, d = 3;
  MatrixX<double> X(n, d);
  VectorX<double> y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) X(i, j) = g(rng);
    y(i) = X(i, 0) - 0.5 * X(i, 1) + 0.7 * g(rng) > 0.8 ? 1 : 0;
  }
  const auto w = balanced_class_weights<double>(y);
  const double pos = y.sum();
  CHECK(w.first == doctest::Approx(n / (2 * pos)));
  SolverOptions<double> opts;
  opts.regularization = 0.5;
  const auto m = fit_logistic(X, y, w, opts);
  CHECK(m.converged);
  // gradient of 0.5|w|^2 + sum_i C c_i log(1 + exp(-s_i z_i)) with s_i = +-1
  VectorX<double> grad = m.weights;
  double gbias = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = X.row(i).dot(m.weights) + m.bias;
    const double c = 0.5 * (y(i) > 0 ? w.first : w.second);
    const double r = 1.0 / (1.0 + std::exp(-z)) - y(i);
    grad += c * r * X.row(i).transpose();
    gbias += c * r;
  }
  CHECK(grad.norm() < 1e-6);
  CHECK(std::fabs(gbias) < 1e-6);
  CHECK(m.weights(0) > 0);
  CHECK(m.weights(1) < 0);
  CHECK_THROWS_AS(fit_logistic(X, VectorX<double>::Zero(n), w, opts), std::invalid_argument);
}

TEST_CASE("L2-loss SVR satisfies its optimality conditions") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  const int n = 150;
  MatrixX<double> X(n, 2);
  VectorX<double> y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = g(rng);
    X(i, 1) = g(rng);
    y(i) = 2.0 * X(i, 0) - X(i, 1) + 3.0 + 0.3 * g(rng);
  }
  SolverOptions<double> opts;
  opts.regularization = 10;
  const double eps = 0.1;
  const auto m = fit_svr(X, y, eps, opts);
  VectorX<double> grad = m.weights;
  double gbias = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = y(i) - X.row(i).dot(m.weights) - m.bias;
    const double excess = std::fabs(r) - eps;
    if (excess <= 0) continue;
    const double coef = -2 * 10 * excess * (r > 0 ? 1 : -1);
    grad += coef * X.row(i).transpose();
    gbias += coef;
  }
  CHECK(grad.norm() < 1e-6);
  CHECK(std::fabs(gbias) < 1e-6);
  CHECK(m.weights(0) == doctest::Approx(2.0).epsilon(0.1));
  CHECK(m.bias == doctest::Approx(3.0).epsilon(0.1));
}

TEST_CASE("protocol config parsing") {
  std::istringstream in(
      "# comment\ntrain_size = 100\ntest_size=40\nc_grid=0.1,1\nfeature_sets=all,timegap\nsweeps=false\n");
  const auto c = ProtocolConfig::parse(in);
  CHECK(c.train_size == 100);
  CHECK(c.test_size == 40);
  CHECK(c.c_grid == std::vector<double>{0.1, 1});
  CHECK(c.feature_sets == std::vector<std::string>{"all", "timegap"});
  CHECK_FALSE(c.sweeps);
  std::istringstream bad("trian_size=3\n");
  CHECK_THROWS(ProtocolConfig::parse(bad));
}

TEST_CASE("trial protocol is deterministic across thread counts") {
  const auto out = synth::generate(synth::planted_spec(260), 2);
  const auto data = make_dataset(out.events);
  const auto language = build_language(data.stats, {"top100"});
  FeatureOptions fo;
  fo.x_values = {10, 50};
  const auto tables = build_feature_tables(data, language, fo);
  CHECK(tables.size() == 3);  // first-10, last-10, first-50
  LabelConfig lc;
  lc.sof = synth::planted_spec(1).sof;
  const auto labels = label_users(data.trajectories, lc);

  ProtocolConfig pc;
  pc.train_size = 90;
  pc.validation_size = 30;
  pc.test_size = 40;
  pc.trials = 3;
  pc.x_values = {10, 50};
  pc.c_grid = {0.1, 1};
  pc.epsilon_grid = {0.1};
  auto run = [&](unsigned threads) {
    pc.threads = threads;
    const auto r = run_trial_protocol(tables, labels, pc);
    std::ostringstream a, b;
    write_results(a, r.rows);
    write_summary(b, r.summary);
    return a.str() + b.str();
  };
  const auto one = run(1);
  CHECK(one == run(3));
  CHECK(one.find("departure,all,first,50,f1_chance") != std::string::npos);
  CHECK(one.find("activity,average") != std::string::npos);
  CHECK(one.find("departure,all_shuffled") != std::string::npos);

  pc.train_size = 5000;
  CHECK_THROWS_AS(run_trial_protocol(tables, labels, pc), std::runtime_error);
}
