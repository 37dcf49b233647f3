#include "commtraj/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "commtraj/community_metrics.hpp"
#include "commtraj/feedback.hpp"
#include "commtraj/framework.hpp"
#include "commtraj/parallel.hpp"
#include "commtraj/stats.hpp"

namespace commtraj {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double or_nan(const std::optional<double>& v) { return v ? *v : kNaN; }

double window_mean(const std::vector<double>& values, std::size_t first, std::size_t last) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = first; i <= last; ++i) {
    if (!std::isnan(values[i])) {
      sum += values[i];
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : kNaN;
}

struct Builder {
  FeatureVector& out;
  bool argmax;

  void add(Family f, std::string name, double v) {
    out.families.push_back(f);
    out.names.push_back(std::move(name));
    out.values.push_back(v);
  }

  // Window values, then argmax / argmin window index (ties: smallest index).
  void series(Family f, const std::string& metric, const std::vector<double>& windows) {
    const std::string prefix = std::string(to_string(f)) + ":" + metric + ":";
    for (std::size_t i = 0; i < windows.size(); ++i) add(f, prefix + "w" + std::to_string(i + 1), windows[i]);
    if (!argmax) return;
    double best_hi = kNaN, best_lo = kNaN;
    double arg_hi = kNaN, arg_lo = kNaN;
    for (std::size_t i = 0; i < windows.size(); ++i) {
      const double v = windows[i];
      if (std::isnan(v)) continue;
      if (std::isnan(best_hi) || v > best_hi) {
        best_hi = v;
        arg_hi = static_cast<double>(i + 1);
      }
      if (std::isnan(best_lo) || v < best_lo) {
        best_lo = v;
        arg_lo = static_cast<double>(i + 1);
      }
    }
    add(f, prefix + "argmax", arg_hi);
    add(f, prefix + "argmin", arg_lo);
  }
};

std::vector<Eigen::Index> subset(const std::vector<Eigen::Index>& v, std::size_t begin, std::size_t end) {
  return {v.begin() + static_cast<std::ptrdiff_t>(begin), v.begin() + static_cast<std::ptrdiff_t>(end)};
}

}  // namespace

std::string_view to_string(Family f) {
  switch (f) {
    case Family::TimeGap: return "timegap";
    case Family::SubInfo: return "subinfo";
    case Family::Lang: return "lang";
    case Family::Feedback: return "feedback";
  }
  return "timegap";
}

std::optional<Family> parse_family(std::string_view s) {
  if (s == "timegap") return Family::TimeGap;
  if (s == "subinfo") return Family::SubInfo;
  if (s == "lang") return Family::Lang;
  if (s == "feedback") return Family::Feedback;
  return std::nullopt;
}

std::string_view to_string(Range r) { return r == Range::First ? "first" : "last"; }

PrefixMetrics compute_prefix_metrics(const UserTrajectory& trajectory, const FeatureContext& ctx) {
  PrefixMetrics m;
  m.user_id = trajectory.user_id;
  const std::size_t n = std::min(trajectory.size(), ctx.prefix_len);
  m.posts.assign(trajectory.events.begin(), trajectory.events.begin() + static_cast<std::ptrdiff_t>(n));
  m.gap_days.assign(n, kNaN);
  m.log_size.assign(n, kNaN);
  m.pronoun.assign(n, kNaN);
  m.length.assign(n, kNaN);
  m.outperform_median.assign(n, kNaN);
  m.outperform_p75.assign(n, kNaN);
  m.cross_entropy.assign(ctx.language.size(), std::vector<double>(n, kNaN));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& post = m.posts[i];
    if (i > 0) m.gap_days[i] = static_cast<double>(post.ts - m.posts[i - 1].ts) / static_cast<double>(kSecondsPerDay);
    if (ctx.stats) {
      m.log_size[i] = or_nan(apparent_size(post, *ctx.stats));
      m.outperform_median[i] = or_nan(post_outperform(post, *ctx.stats, FeedbackQuantile::Median));
      m.outperform_p75[i] = or_nan(post_outperform(post, *ctx.stats, FeedbackQuantile::P75));
    }
    for (std::size_t v = 0; v < ctx.language.size(); ++v)
      m.cross_entropy[v][i] = or_nan(ctx.language[v]->post_cross_entropy(post));
    if (post.tokens) {
      m.pronoun[i] = or_nan(pronoun_rate(*post.tokens, ctx.pronouns));
      m.length[i] = static_cast<double>(post_length(*post.tokens));
    }
  }
  return m;
}

FeatureVector extract_features(const PrefixMetrics& prefix, const FeatureContext& ctx, Range range, std::size_t x) {
  if (x == 0 || x % ctx.window_size != 0 || x > ctx.prefix_len)
    throw std::invalid_argument("range length must be a positive multiple of the window size within the prefix");
  if (prefix.posts.size() < ctx.prefix_len)
    throw std::invalid_argument("user '" + prefix.user_id + "' has fewer posts than the prefix length");
  FeatureVector out;
  out.user_id = prefix.user_id;
  out.range = range;
  out.x = x;
  Builder b{out, ctx.argmax_features};

  const std::size_t begin = range == Range::First ? 0 : ctx.prefix_len - x;  // 0-based
  const std::size_t nw = x / ctx.window_size;
  const std::span<const PostEvent> posts(prefix.posts);
  auto windowed = [&](const std::vector<double>& per_post) {
    std::vector<double> w(nw);
    for (std::size_t i = 0; i < nw; ++i) {
      const std::size_t first = begin + i * ctx.window_size;
      w[i] = window_mean(per_post, first, first + ctx.window_size - 1);
    }
    return w;
  };
  auto per_window = [&](auto&& fn) {
    std::vector<double> w(nw);
    for (std::size_t i = 0; i < nw; ++i) w[i] = fn(posts.subspan(begin + i * ctx.window_size, ctx.window_size));
    return w;
  };

  // time gap
  b.series(Family::TimeGap, "gap", windowed(prefix.gap_days));
  b.add(Family::TimeGap, "timegap:gap:all", window_mean(prefix.gap_days, begin, begin + x - 1));

  // community choice
  b.series(Family::SubInfo, "uniq",
           per_window([](auto w) { return static_cast<double>(unique_communities(w)); }));
  b.series(Family::SubInfo, "jumps", per_window([](auto w) { return static_cast<double>(jumps(w)); }));
  b.series(Family::SubInfo, "entropy", per_window([](auto w) { return entropy(community_distribution(w)); }));
  b.series(Family::SubInfo, "gini", per_window([](auto w) { return gini_simpson(community_distribution(w)); }));
  b.series(Family::SubInfo, "logsize", windowed(prefix.log_size));
  const auto whole = posts.subspan(begin, x);
  const auto whole_dist = community_distribution(whole);
  b.add(Family::SubInfo, "subinfo:uniq:all", static_cast<double>(unique_communities(whole)));
  b.add(Family::SubInfo, "subinfo:entropy:all", entropy(whole_dist));
  b.add(Family::SubInfo, "subinfo:gini:all", gini_simpson(whole_dist));

  if (ctx.has_tokens) {
    for (std::size_t v = 0; v < ctx.language.size(); ++v)
      b.series(Family::Lang, "ce_" + ctx.language[v]->vocabulary().name, windowed(prefix.cross_entropy[v]));
    b.series(Family::Lang, "pronoun", windowed(prefix.pronoun));
    b.series(Family::Lang, "length", windowed(prefix.length));
  }
  if (ctx.has_feedback) {
    b.series(Family::Feedback, "fb_med", windowed(prefix.outperform_median));
    b.series(Family::Feedback, "fb_p75", windowed(prefix.outperform_p75));
  }
  return out;
}

FeatureVector extract_features(const UserTrajectory& trajectory, const FeatureContext& ctx, Range range, std::size_t x) {
  return extract_features(compute_prefix_metrics(trajectory, ctx), ctx, range, x);
}

std::vector<Eigen::Index> FeatureTable::columns_of(const std::vector<Family>& wanted) const {
  std::vector<Eigen::Index> out;
  for (std::size_t j = 0; j < families.size(); ++j)
    if (std::find(wanted.begin(), wanted.end(), families[j]) != wanted.end()) out.push_back(static_cast<Eigen::Index>(j));
  return out;
}

std::optional<std::size_t> FeatureTable::row_of(const std::string& user) const {
  auto it = std::lower_bound(users.begin(), users.end(), user);
  if (it == users.end() || *it != user) return std::nullopt;
  return static_cast<std::size_t>(it - users.begin());
}

FeatureTable make_table(const std::vector<FeatureVector>& vectors) {
  FeatureTable t;
  if (vectors.empty()) return t;
  t.range = vectors.front().range;
  t.x = vectors.front().x;
  t.names = vectors.front().names;
  t.families = vectors.front().families;
  std::vector<std::size_t> order(vectors.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return vectors[a].user_id < vectors[b].user_id; });
  t.values.resize(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(t.names.size()));
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& v = vectors[order[r]];
    if (v.names != t.names) throw std::invalid_argument("feature vectors disagree on column layout");
    t.users.push_back(v.user_id);
    for (std::size_t j = 0; j < v.values.size(); ++j)
      t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = v.values[j];
  }
  return t;
}

void write_feature_table(std::ostream& out, const FeatureTable& table) {
  out << "user";
  for (const auto& n : table.names) out << ',' << n;
  out << '\n';
  for (std::size_t r = 0; r < table.users.size(); ++r) {
    out << table.users[r];
    for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
      out << ',';
      const double v = table.values(static_cast<Eigen::Index>(r), j);
      if (!std::isnan(v)) out << format_double(v);
    }
    out << '\n';
  }
}

FeatureTable read_feature_table(std::istream& in, Range range, std::size_t x) {
  FeatureTable t;
  t.range = range;
  t.x = x;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty feature table");
  {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    if (cell != "user") throw std::runtime_error("feature table must start with a 'user' column");
    while (std::getline(ss, cell, ',')) {
      auto family = parse_family(cell.substr(0, cell.find(':')));
      if (!family) throw std::runtime_error("feature '" + cell + "' has no known family prefix");
      t.names.push_back(cell);
      t.families.push_back(*family);
    }
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = line.find(',');
    t.users.push_back(line.substr(0, pos));
    while (pos != std::string::npos) {
      const std::size_t next = line.find(',', pos + 1);
      const std::string cell = line.substr(pos + 1, next == std::string::npos ? std::string::npos : next - pos - 1);
      row.push_back(cell.empty() ? kNaN : std::stod(cell));
      pos = next;
    }
    if (row.size() != t.names.size())
      throw std::runtime_error("feature row for '" + t.users.back() + "' has the wrong number of columns");
    rows.push_back(std::move(row));
  }
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < rows[r].size(); ++j)
      t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = rows[r][j];
  return t;
}

Preprocessor Preprocessor::fit(const MatrixX<double>& values, const std::vector<Eigen::Index>& rows,
                               const std::vector<Eigen::Index>& columns) {
  Preprocessor p;
  p.columns = columns;
  p.impute = VectorX<double>::Zero(static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    double sum = 0.0;
    std::size_t n = 0;
    for (auto r : rows) {
      const double v = values(r, columns[k]);
      if (std::isnan(v)) continue;
      sum += v;
      ++n;
    }
    p.impute(static_cast<Eigen::Index>(k)) = n ? sum / static_cast<double>(n) : 0.0;
    if (n < rows.size()) p.indicator_columns.push_back(static_cast<Eigen::Index>(k));
  }
  Preprocessor unscaled = p;
  unscaled.scaler.min = VectorX<double>::Zero(static_cast<Eigen::Index>(columns.size() + p.indicator_columns.size()));
  unscaled.scaler.range = VectorX<double>::Ones(unscaled.scaler.min.size());
  p.scaler = MinMaxScaler<double>::fit(unscaled.transform(values, rows));
  return p;
}

MatrixX<double> Preprocessor::transform(const MatrixX<double>& values, const std::vector<Eigen::Index>& rows) const {
  const auto d = static_cast<Eigen::Index>(columns.size());
  MatrixX<double> out(static_cast<Eigen::Index>(rows.size()), d + static_cast<Eigen::Index>(indicator_columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index k = 0; k < d; ++k) {
      const double v = values(rows[i], columns[static_cast<std::size_t>(k)]);
      out(r, k) = std::isnan(v) ? impute(k) : v;
    }
    for (std::size_t m = 0; m < indicator_columns.size(); ++m) {
      const double v = values(rows[i], columns[static_cast<std::size_t>(indicator_columns[m])]);
      out(r, d + static_cast<Eigen::Index>(m)) = std::isnan(v) ? 1.0 : 0.0;
    }
  }
  return scaler.transform(out);
}

namespace {

VectorX<double> gather(const VectorX<double>& v, const std::vector<Eigen::Index>& rows) {
  VectorX<double> out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
  return out;
}

VectorX<double> predicted_labels(const LinearModel<double>& model, const MatrixX<double>& X) {
  return (model.decision(X).array() > 0.0).cast<double>();
}

}  // namespace

FittedClassifier fit_departure_classifier(const MatrixX<double>& values, const std::vector<Eigen::Index>& columns,
                                          const std::vector<Eigen::Index>& train,
                                          const std::vector<Eigen::Index>& validation_fit,
                                          const std::vector<Eigen::Index>& validation,
                                          const VectorX<double>& positive, const std::vector<double>& grid) {
  FittedClassifier out;
  if (grid.empty()) throw std::invalid_argument("empty regularization grid");
  {
    const auto pre = Preprocessor::fit(values, validation_fit, columns);
    const auto X = pre.transform(values, validation_fit);
    const auto y = gather(positive, validation_fit);
    const auto Xv = pre.transform(values, validation);
    const auto yv = gather(positive, validation);
    const auto weights = balanced_class_weights<double>(y);
    double best = -1.0;
    for (double c : grid) {
      SolverOptions<double> opts;
      opts.regularization = c;
      const auto model = fit_logistic(X, y, weights, opts);
      const double score = f1_score(predicted_labels(model, Xv), yv);
      if (score > best) {
        best = score;
        out.regularization = c;
      }
    }
    out.validation_score = best;
  }
  out.pre = Preprocessor::fit(values, train, columns);
  const auto X = out.pre.transform(values, train);
  const auto y = gather(positive, train);
  SolverOptions<double> opts;
  opts.regularization = out.regularization;
  out.model = fit_logistic(X, y, balanced_class_weights<double>(y), opts);
  out.converged = out.model.converged;
  return out;
}

FittedRegressor fit_activity_regressor(const MatrixX<double>& values, const std::vector<Eigen::Index>& columns,
                                       const std::vector<Eigen::Index>& train,
                                       const std::vector<Eigen::Index>& validation_fit,
                                       const std::vector<Eigen::Index>& validation, const VectorX<double>& target,
                                       const std::vector<double>& grid, const std::vector<double>& epsilons) {
  FittedRegressor out;
  if (grid.empty() || epsilons.empty()) throw std::invalid_argument("empty hyperparameter grid");
  {
    const auto pre = Preprocessor::fit(values, validation_fit, columns);
    const auto X = pre.transform(values, validation_fit);
    const auto y = gather(target, validation_fit);
    const auto Xv = pre.transform(values, validation);
    const auto yv = gather(target, validation);
    double best = std::numeric_limits<double>::infinity();
    for (double c : grid) {
      for (double eps : epsilons) {
        SolverOptions<double> opts;
        opts.regularization = c;
        const auto model = fit_svr(X, y, eps, opts);
        const VectorX<double> pred = model.decision(Xv);
        const double score = rmse(pred, yv);
        if (score < best) {
          best = score;
          out.regularization = c;
          out.epsilon = eps;
        }
      }
    }
    out.validation_score = best;
  }
  out.pre = Preprocessor::fit(values, train, columns);
  const auto X = out.pre.transform(values, train);
  const auto y = gather(target, train);
  SolverOptions<double> opts;
  opts.regularization = out.regularization;
  out.model = fit_svr(X, y, out.epsilon, opts);
  out.converged = out.model.converged;
  return out;
}

double chance_f1(double positive_rate, double predicted_rate) {
  if (positive_rate + predicted_rate <= 0.0) return 0.0;
  return 2.0 * positive_rate * predicted_rate / (positive_rate + predicted_rate);
}

double activity_target(std::size_t future_posts) {
  return future_posts == 0 ? std::log2(1.0) : std::log2(static_cast<double>(future_posts));
}

const std::vector<FeatureSet>& standard_feature_sets() {
  static const std::vector<FeatureSet> sets{
      {"timegap", {Family::TimeGap}},
      {"subinfo", {Family::SubInfo}},
      {"lang", {Family::Lang}},
      {"feedback", {Family::Feedback}},
      {"all", {Family::TimeGap, Family::SubInfo, Family::Lang, Family::Feedback}},
  };
  return sets;
}

ProtocolConfig ProtocolConfig::parse(std::istream& in) {
  ProtocolConfig c;
  auto doubles = [](const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
    return out;
  };
  auto strings = [](const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  auto boolean = [](const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config key '" + key + "' expects a boolean");
  };
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("config line without '=': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "train_size") c.train_size = std::stoull(value);
    else if (key == "test_size") c.test_size = std::stoull(value);
    else if (key == "validation_size") c.validation_size = std::stoull(value);
    else if (key == "prefix_len") c.prefix_len = std::stoull(value);
    else if (key == "trials") c.trials = std::stoull(value);
    else if (key == "seed") c.seed = std::stoull(value);
    else if (key == "c_grid") c.c_grid = doubles(value);
    else if (key == "epsilon_grid") c.epsilon_grid = doubles(value);
    else if (key == "x_values") {
      c.x_values.clear();
      for (double x : doubles(value)) c.x_values.push_back(static_cast<std::size_t>(x));
    } else if (key == "feature_sets") c.feature_sets = strings(value);
    else if (key == "departure") c.departure = boolean(key, value);
    else if (key == "activity") c.activity = boolean(key, value);
    else if (key == "sweeps") c.sweeps = boolean(key, value);
    else if (key == "shuffled_control") c.shuffled_control = boolean(key, value);
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
  return c;
}

namespace {

struct Experiment {
  std::string feature_set;
  std::vector<Family> families;
  Range range;
  std::size_t x;
  bool shuffled = false;
};

std::vector<Experiment> experiments(const ProtocolConfig& config, bool departure, const FeatureTables& tables) {
  std::vector<Experiment> out;
  const auto& sets = standard_feature_sets();
  auto find_set = [&](const std::string& name) -> const FeatureSet& {
    for (const auto& s : sets)
      if (s.name == name) return s;
    throw std::invalid_argument("unknown feature set '" + name + "'");
  };
  for (const auto& name : config.feature_sets) {
    const auto& s = find_set(name);
    out.push_back({s.name, s.families, Range::First, config.prefix_len, false});
  }
  if (config.sweeps) {
    const auto& all = find_set("all");
    for (std::size_t x : config.x_values) {
      if (x == config.prefix_len) continue;
      for (Range r : {Range::First, Range::Last}) {
        if (!tables.contains({r, x})) throw std::invalid_argument("missing feature table for range sweep");
        out.push_back({"all", all.families, r, x, false});
      }
    }
  }
  if (departure && config.shuffled_control) out.push_back({"all_shuffled", find_set("all").families, Range::First, config.prefix_len, true});
  return out;
}

std::vector<Eigen::Index> present_columns(const FeatureTable& table, const std::vector<Family>& families) {
  return table.columns_of(families);
}

void run_task(const FeatureTables& tables, const std::vector<Eigen::Index>& pool, const VectorX<double>& labels,
              bool departure, const ProtocolConfig& config, std::size_t trial, std::vector<ResultRow>& rows,
              std::vector<std::string>& warnings) {
  const std::string task = departure ? "departure" : "activity";
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                    static_cast<std::uint32_t>(trial), departure ? 0xde9au : 0xac71u};
  std::mt19937_64 rng(seq);
  auto order = pool;
  std::shuffle(order.begin(), order.end(), rng);
  const auto train = subset(order, 0, config.train_size);
  const auto test = subset(order, config.train_size, config.train_size + config.test_size);
  const auto validation_fit = subset(train, 0, config.train_size - config.validation_size);
  const auto validation = subset(train, config.train_size - config.validation_size, config.train_size);

  VectorX<double> shuffled = labels;
  {
    // Permute training labels among training users only; test labels stay true.
    std::vector<double> train_labels;
    for (auto r : train) train_labels.push_back(labels(r));
    std::shuffle(train_labels.begin(), train_labels.end(), rng);
    for (std::size_t i = 0; i < train.size(); ++i) shuffled(train[i]) = train_labels[i];
  }
  const VectorX<double> y_test = gather(labels, test);

  auto emit = [&](const std::string& set, Range r, std::size_t x, const std::string& metric, double v) {
    rows.push_back({trial, task, set, std::string(to_string(r)), x, metric, v});
  };

  if (departure) {
    const double pi = y_test.mean();
    emit("always_positive", Range::First, config.prefix_len, "f1", chance_f1(pi, 1.0));
  } else {
    const double mean = gather(labels, train).mean();
    const VectorX<double> pred = VectorX<double>::Constant(y_test.size(), mean);
    emit("average", Range::First, config.prefix_len, "rmse", rmse(pred, y_test));
  }

  // The last-x sweep at x = prefix_len is the same table as first-x.
  auto mirror_last = [&](const Experiment& exp) {
    return config.sweeps && exp.feature_set == "all" && exp.range == Range::First && exp.x == config.prefix_len &&
           std::find(config.x_values.begin(), config.x_values.end(), config.prefix_len) != config.x_values.end();
  };
  for (const auto& exp : experiments(config, departure, tables)) {
    const auto& table = tables.at({exp.range, exp.x});
    const auto columns = present_columns(table, exp.families);
    if (columns.empty()) {
      warnings.push_back("trial " + std::to_string(trial) + ": feature set '" + exp.feature_set +
                         "' has no available columns; skipped");
      continue;
    }
    const VectorX<double>& y = exp.shuffled ? shuffled : labels;
    if (departure) {
      const auto fit = fit_departure_classifier(table.values, columns, train, validation_fit, validation, y,
                                                config.c_grid);
      if (!fit.converged) warnings.push_back("trial " + std::to_string(trial) + ": classifier for '" +
                                             exp.feature_set + "' hit the iteration cap");
      const auto X = fit.pre.transform(table.values, test);
      const VectorX<double> pred = predicted_labels(fit.model, X);
      emit(exp.feature_set, exp.range, exp.x, "f1", f1_score(pred, y_test));
      emit(exp.feature_set, exp.range, exp.x, "f1_chance", chance_f1(y_test.mean(), pred.mean()));
      if (mirror_last(exp)) {
        emit("all", Range::Last, exp.x, "f1", f1_score(pred, y_test));
        emit("all", Range::Last, exp.x, "f1_chance", chance_f1(y_test.mean(), pred.mean()));
      }
    } else {
      const auto fit = fit_activity_regressor(table.values, columns, train, validation_fit, validation, y,
                                              config.c_grid, config.epsilon_grid);
      if (!fit.converged) warnings.push_back("trial " + std::to_string(trial) + ": regressor for '" +
                                             exp.feature_set + "' hit the iteration cap");
      const auto X = fit.pre.transform(table.values, test);
      const VectorX<double> pred = fit.model.decision(X);
      emit(exp.feature_set, exp.range, exp.x, "rmse", rmse(pred, y_test));
      if (mirror_last(exp)) emit("all", Range::Last, exp.x, "rmse", rmse(pred, y_test));
    }
  }
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows, std::size_t full) {
  using Key = std::tuple<std::string, std::string, std::string, std::size_t, std::string>;
  std::vector<Key> order;
  std::map<Key, std::map<std::size_t, double>> values;  // key -> trial -> value
  for (const auto& r : rows) {
    Key k{r.task, r.feature_set, r.range, r.x, r.metric};
    if (!values.contains(k)) order.push_back(k);
    values[k][r.trial] = r.value;
  }
  auto paired = [&](const Key& a, const Key& b) -> std::optional<double> {
    if (!values.contains(b)) return std::nullopt;
    std::vector<double> va, vb;
    for (const auto& [trial, v] : values.at(a)) {
      auto it = values.at(b).find(trial);
      if (it == values.at(b).end()) continue;
      va.push_back(v);
      vb.push_back(it->second);
    }
    if (va.empty()) return std::nullopt;
    const auto w = stats::wilcoxon_signed_rank(va, vb);
    return w.p_exact ? *w.p_exact : w.p;
  };
  std::vector<SummaryRow> out;
  for (const auto& k : order) {
    const auto& [task, set, range, x, metric] = k;
    std::vector<double> v;
    for (const auto& [trial, value] : values.at(k)) v.push_back(value);
    SummaryRow s{task, set, range, x, metric, stats::mean(v), stats::standard_error(v), v.size(), "", std::nullopt};
    Key ref;
    bool compare = false;
    if (metric == "f1_chance") {
      compare = false;
    } else if (set == "all_shuffled") {
      ref = Key{task, set, range, x, "f1_chance"};
      s.compared_to = "all_shuffled/first/" + std::to_string(full) + "/f1_chance";
      compare = true;
    } else if (range == "last") {
      ref = Key{task, set, "first", x, metric};
      s.compared_to = set + "/first/" + std::to_string(x) + "/" + metric;
      compare = x != full;
    } else if (x == full && set != "all") {
      ref = Key{task, "all", "first", full, metric};
      s.compared_to = "all/first/" + std::to_string(full) + "/" + metric;
      compare = true;
    }
    if (compare) s.wilcoxon_p = paired(k, ref);
    if (!s.wilcoxon_p) s.compared_to.clear();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TrialResults run_trial_protocol(const FeatureTables& tables, const std::map<std::string, UserLabel>& labels,
                                const ProtocolConfig& config) {
  if (!tables.contains({Range::First, config.prefix_len}))
    throw std::invalid_argument("the full-prefix feature table is required");
  if (config.validation_size >= config.train_size)
    throw std::invalid_argument("validation size must be smaller than the training size");
  const auto& base = tables.at({Range::First, config.prefix_len});
  for (const auto& [key, t] : tables)
    if (t.users != base.users) throw std::invalid_argument("feature tables cover different users");

  const auto n = static_cast<Eigen::Index>(base.users.size());
  VectorX<double> departing = VectorX<double>::Zero(n);
  VectorX<double> activity = VectorX<double>::Zero(n);
  std::vector<Eigen::Index> departure_pool, activity_pool;
  for (Eigen::Index r = 0; r < n; ++r) {
    auto it = labels.find(base.users[static_cast<std::size_t>(r)]);
    if (it == labels.end()) continue;
    const auto& l = it->second;
    activity(r) = activity_target(l.future_post_count);
    activity_pool.push_back(r);
    if (l.status && *l.status != Status::Neither) {
      departing(r) = *l.status == Status::Departing ? 1.0 : 0.0;
      departure_pool.push_back(r);
    }
  }
  const std::size_t needed = config.train_size + config.test_size;
  if (config.departure && departure_pool.size() < needed)
    throw std::runtime_error("departure task needs " + std::to_string(needed) + " departing/staying users, found " +
                             std::to_string(departure_pool.size()));
  if (config.activity && activity_pool.size() < needed)
    throw std::runtime_error("activity task needs " + std::to_string(needed) + " labeled users, found " +
                             std::to_string(activity_pool.size()));

  std::vector<std::vector<ResultRow>> per_trial(config.trials);
  std::vector<std::vector<std::string>> per_trial_warnings(config.trials);
  parallel_for(config.trials, config.threads, [&](std::size_t t) {
    if (config.departure) run_task(tables, departure_pool, departing, true, config, t, per_trial[t], per_trial_warnings[t]);
    if (config.activity) run_task(tables, activity_pool, activity, false, config, t, per_trial[t], per_trial_warnings[t]);
  });
  TrialResults out;
  for (std::size_t t = 0; t < config.trials; ++t) {
    out.rows.insert(out.rows.end(), per_trial[t].begin(), per_trial[t].end());
    out.warnings.insert(out.warnings.end(), per_trial_warnings[t].begin(), per_trial_warnings[t].end());
  }
  out.summary = summarize(out.rows, config.prefix_len);
  return out;
}

void write_results(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "trial,task,feature_set,range,x,metric,value\n";
  for (const auto& r : rows)
    out << r.trial << ',' << r.task << ',' << r.feature_set << ',' << r.range << ',' << r.x << ',' << r.metric << ','
        << format_double(r.value) << '\n';
}

void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "task,feature_set,range,x,metric,mean,stderr,n,compared_to,wilcoxon_p\n";
  for (const auto& r : rows) {
    out << r.task << ',' << r.feature_set << ',' << r.range << ',' << r.x << ',' << r.metric << ','
        << format_double(r.mean) << ',' << format_double(r.stderr_) << ',' << r.n << ',' << r.compared_to << ',';
    if (r.wilcoxon_p) out << format_double(*r.wilcoxon_p);
    out << '\n';
  }
}

}  // namespace commtraj
