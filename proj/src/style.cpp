#include "commtraj/style.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "commtraj/framework.hpp"
#include "commtraj/parallel.hpp"
#include "commtraj/stats.hpp"

namespace commtraj {

namespace {

std::mt19937_64 user_rng(std::uint64_t seed, const std::string& user, std::uint32_t stream) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  for (unsigned char ch : user) words.push_back(ch);
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

std::map<std::string, std::vector<const PostEvent*>> posts_by_community(const UserTrajectory& traj) {
  std::map<std::string, std::vector<const PostEvent*>> out;
  for (const auto& e : traj.events) out[e.community].push_back(&e);
  return out;
}

std::vector<PostEvent> first_n(const std::vector<const PostEvent*>& posts, std::size_t begin, std::size_t n) {
  std::vector<PostEvent> out;
  out.reserve(n);
  for (std::size_t i = begin; i < begin + n; ++i) out.push_back(*posts[i]);
  return out;
}

}  // namespace

std::vector<StyleTriple> build_triples(const TrajectoryMap& trajectories, const TripleOptions& options) {
  std::vector<StyleTriple> out;
  for (const auto& [user, traj] : trajectories) {
    auto rng = user_rng(options.seed, user, 0x7121u);
    std::vector<std::pair<std::string, const std::vector<const PostEvent*>*>> eligible;
    const auto by_community = posts_by_community(traj);
    for (const auto& [c, posts] : by_community)
      if (posts.size() >= options.posts_per_side) eligible.emplace_back(c, &posts);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < eligible.size(); ++i)
      for (std::size_t j = i + 1; j < eligible.size(); ++j) pairs.emplace_back(i, j);
    if (options.max_per_user && pairs.size() > options.max_per_user) {
      std::shuffle(pairs.begin(), pairs.end(), rng);
      pairs.resize(options.max_per_user);
      std::sort(pairs.begin(), pairs.end());
    }
    for (const auto& [i, j] : pairs) {
      StyleTriple t;
      t.user_id = user;
      t.community_a = eligible[i].first;
      t.community_b = eligible[j].first;
      t.posts_a = first_n(*eligible[i].second, 0, options.posts_per_side);
      t.posts_b = first_n(*eligible[j].second, 0, options.posts_per_side);
      t.flipped = std::bernoulli_distribution(0.5)(rng);
      out.push_back(std::move(t));
    }
  }
  return out;
}

std::vector<StyleTriple> build_null_triples(const TrajectoryMap& trajectories, const TripleOptions& options) {
  std::vector<StyleTriple> out;
  const std::size_t k = options.posts_per_side;
  for (const auto& [user, traj] : trajectories) {
    auto rng = user_rng(options.seed, user, 0x0a11u);
    std::size_t kept = 0;
    for (const auto& [c, posts] : posts_by_community(traj)) {
      if (posts.size() < 2 * k) continue;
      if (options.max_per_user && kept == options.max_per_user) break;
      std::vector<std::size_t> order(2 * k);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
      std::sort(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
      StyleTriple t;
      t.user_id = user;
      t.community_a = t.community_b = c;
      for (std::size_t i = 0; i < k; ++i) t.posts_a.push_back(*posts[order[i]]);
      for (std::size_t i = k; i < 2 * k; ++i) t.posts_b.push_back(*posts[order[i]]);
      t.flipped = std::bernoulli_distribution(0.5)(rng);
      out.push_back(std::move(t));
      ++kept;
    }
  }
  return out;
}

std::optional<std::vector<double>> style_features(const StyleTriple& triple, const StyleContext& ctx,
                                                  std::string* diagnostic) {
  if (!ctx.models || !ctx.stats) throw std::invalid_argument("style context needs statistics and language models");
  if (ctx.window == 0 || triple.posts_a.size() % ctx.window || triple.posts_a.size() != triple.posts_b.size())
    throw std::invalid_argument("triple sides must be equal multiples of the window");
  const Vocabulary& vocab = ctx.models->vocabulary();
  auto fail = [&](std::string why) -> std::optional<std::vector<double>> {
    if (diagnostic) *diagnostic = triple.user_id + " (" + triple.community_a + ", " + triple.community_b + "): " + why;
    return std::nullopt;
  };

  // The user's own units per (community, month), when they are left out.
  std::map<CommunityMonthKey, TokenCounts, CommunityMonthLess> own;
  std::map<CommunityMonthKey, MonthlyLanguageModel, CommunityMonthLess> held_out;
  if (ctx.exclude_own) {
    auto it = ctx.exclude_own->find(triple.user_id);
    if (it == ctx.exclude_own->end()) return fail("user missing from trajectories");
    for (const auto& e : it->second.events) {
      if (e.community != triple.community_a && e.community != triple.community_b) continue;
      const auto& units = post_units(e, vocab);
      if (!units) continue;
      auto& counts = own[CommunityMonthKey{e.community, month_of(e.ts)}];
      for (const auto& u : map_rare(*units, vocab)) ++counts[u];
    }
  }
  auto model_for = [&](const std::string& community, Month month) -> const MonthlyLanguageModel* {
    if (!ctx.exclude_own) return ctx.models->find(community, month);
    const CommunityMonthKey key{community, month};
    if (auto it = held_out.find(key); it != held_out.end()) return &it->second;
    const auto* stats = find_stats(*ctx.stats, community, month);
    if (!stats) return nullptr;
    auto own_it = own.find(key);
    return &held_out.emplace(key, MonthlyLanguageModel(*stats, vocab, Smoothing::AddOneOverV,
                                                       own_it == own.end() ? nullptr : &own_it->second))
                .first->second;
  };

  const auto& first = triple.flipped ? triple.posts_b : triple.posts_a;
  const auto& second = triple.flipped ? triple.posts_a : triple.posts_b;
  std::vector<double> out;
  out.reserve(2 * (first.size() / ctx.window) * 2);
  for (const auto* side : {&first, &second}) {
    for (std::size_t w = 0; w < side->size(); w += ctx.window) {
      for (const auto* community : {&triple.community_a, &triple.community_b}) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t i = w; i < w + ctx.window; ++i) {
          const PostEvent& post = (*side)[i];
          const Month month = month_of(post.ts);
          const auto* model = model_for(*community, month);
          if (!model || !model->available())
            return fail("no language model for " + *community + " in " + to_string(month));
          const auto& units = post_units(post, vocab);
          if (!units) return fail("post without " + std::string(vocab.kind == VocabularyKind::PosTags ? "tags" : "tokens"));
          if (auto ce = cross_entropy(*units, *model)) {
            sum += *ce;
            ++n;
          }
        }
        if (n == 0) return fail("window of empty posts");
        out.push_back(sum / static_cast<double>(n));
      }
    }
  }
  return out;
}

StyleDataset build_style_dataset(const std::vector<StyleTriple>& triples, const StyleContext& ctx, unsigned threads) {
  std::vector<std::optional<std::vector<double>>> features(triples.size());
  std::vector<std::string> diagnostics(triples.size());
  parallel_for(triples.size(), threads,
               [&](std::size_t i) { features[i] = style_features(triples[i], ctx, &diagnostics[i]); });
  StyleDataset d;
  d.vocabulary = ctx.models ? ctx.models->vocabulary().name : "";
  std::size_t width = 0;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    if (features[i]) {
      d.triple_index.push_back(i);
      width = features[i]->size();
    } else {
      d.diagnostics.push_back(diagnostics[i]);
    }
  }
  d.features.resize(static_cast<Eigen::Index>(d.triple_index.size()), static_cast<Eigen::Index>(width));
  d.labels.resize(static_cast<Eigen::Index>(d.triple_index.size()));
  for (std::size_t r = 0; r < d.triple_index.size(); ++r) {
    const auto& f = *features[d.triple_index[r]];
    for (std::size_t j = 0; j < f.size(); ++j)
      d.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = f[j];
    d.labels(static_cast<Eigen::Index>(r)) = triples[d.triple_index[r]].flipped ? 1.0 : 0.0;
  }
  return d;
}

namespace {

MatrixX<double> rows_of(const MatrixX<double>& m, const std::vector<Eigen::Index>& rows) {
  MatrixX<double> out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

VectorX<double> rows_of(const VectorX<double>& v, const std::vector<Eigen::Index>& rows) {
  VectorX<double> out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
  return out;
}

double accuracy(const LinearModel<double>& model, const MatrixX<double>& X, const VectorX<double>& y) {
  const VectorX<double> score = model.decision(X);
  std::size_t hit = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) hit += (score(i) > 0) == (y(i) > 0);
  return y.size() ? static_cast<double>(hit) / static_cast<double>(y.size()) : 0.0;
}

LinearModel<double> fit_scaled(const MatrixX<double>& X, const VectorX<double>& y, double c,
                               MinMaxScaler<double>& scaler) {
  scaler = MinMaxScaler<double>::fit(X);
  SolverOptions<double> opts;
  opts.regularization = c;
  return fit_logistic(scaler.transform(X), y, balanced_class_weights<double>(y), opts);
}

double run_split(const StyleDataset& d, const StyleConfig& config, std::size_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                    static_cast<std::uint32_t>(trial), 0x57e1u};
  std::mt19937_64 rng(seq);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d.labels.size()));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t dev = static_cast<std::size_t>(std::llround(config.dev_share * static_cast<double>(config.train_size)));
  const std::vector<Eigen::Index> fit_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.train_size - dev));
  const std::vector<Eigen::Index> dev_rows(order.begin() + static_cast<std::ptrdiff_t>(config.train_size - dev),
                                           order.begin() + static_cast<std::ptrdiff_t>(config.train_size));
  const std::vector<Eigen::Index> train_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.train_size));
  const std::vector<Eigen::Index> test_rows(order.begin() + static_cast<std::ptrdiff_t>(config.train_size),
                                            order.begin() + static_cast<std::ptrdiff_t>(config.train_size + config.test_size));

  double best_c = config.c_grid.front();
  if (dev > 0 && config.c_grid.size() > 1) {
    const auto X = rows_of(d.features, fit_rows);
    const auto y = rows_of(d.labels, fit_rows);
    const auto Xd = rows_of(d.features, dev_rows);
    const auto yd = rows_of(d.labels, dev_rows);
    double best = -1.0;
    for (double c : config.c_grid) {
      MinMaxScaler<double> scaler;
      const auto model = fit_scaled(X, y, c, scaler);
      const double acc = accuracy(model, scaler.transform(Xd), yd);
      if (acc > best) {
        best = acc;
        best_c = c;
      }
    }
  }
  MinMaxScaler<double> scaler;
  const auto model = fit_scaled(rows_of(d.features, train_rows), rows_of(d.labels, train_rows), best_c, scaler);
  return accuracy(model, scaler.transform(rows_of(d.features, test_rows)), rows_of(d.labels, test_rows));
}

}  // namespace

StyleResults run_style_experiment(const std::vector<StyleDataset>& datasets, const StyleConfig& config) {
  if (config.c_grid.empty()) throw std::invalid_argument("empty regularization grid");
  if (config.dev_share < 0.0 || config.dev_share >= 1.0) throw std::invalid_argument("dev share must be in [0,1)");
  for (const auto& d : datasets) {
    if (d.labels.size() == 0) throw std::runtime_error("no usable style triples for '" + d.vocabulary + "'");
    const double flipped = d.labels.sum();
    if (flipped == 0.0 || flipped == static_cast<double>(d.labels.size()))
      throw std::invalid_argument("style triples are not orientation-randomized");
    if (static_cast<std::size_t>(d.labels.size()) < config.train_size + config.test_size)
      throw std::runtime_error("style experiment for '" + d.vocabulary + "' needs " +
                               std::to_string(config.train_size + config.test_size) + " triples, found " +
                               std::to_string(d.labels.size()));
  }
  const std::size_t jobs = datasets.size() * config.trials;
  std::vector<double> acc(jobs);
  parallel_for(jobs, config.threads,
               [&](std::size_t k) { acc[k] = run_split(datasets[k / config.trials], config, k % config.trials); });
  StyleResults out;
  for (std::size_t v = 0; v < datasets.size(); ++v) {
    std::vector<double> values(acc.begin() + static_cast<std::ptrdiff_t>(v * config.trials),
                               acc.begin() + static_cast<std::ptrdiff_t>((v + 1) * config.trials));
    for (std::size_t t = 0; t < config.trials; ++t) out.rows.push_back({datasets[v].vocabulary, t, values[t]});
    out.summary.push_back({datasets[v].vocabulary, stats::mean(values), stats::standard_error(values), values.size(),
                           static_cast<std::size_t>(datasets[v].labels.size())});
  }
  return out;
}

void write_style_results(std::ostream& out, const std::vector<StyleTrialRow>& rows) {
  out << "vocabulary,trial,accuracy\n";
  for (const auto& r : rows) out << r.vocabulary << ',' << r.trial << ',' << format_double(r.accuracy) << '\n';
}

void write_style_summary(std::ostream& out, const std::vector<StyleSummaryRow>& rows) {
  out << "vocabulary,mean,stderr,n,triples\n";
  for (const auto& r : rows)
    out << r.vocabulary << ',' << format_double(r.mean) << ',' << format_double(r.stderr_) << ',' << r.n << ','
        << r.triples << '\n';
}

}  // namespace commtraj
