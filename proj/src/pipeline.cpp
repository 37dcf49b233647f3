#include "commtraj/pipeline.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "commtraj/feedback.hpp"
#include "commtraj/parallel.hpp"

namespace commtraj {

Dataset make_dataset(std::vector<PostEvent> events, unsigned threads) {
  Dataset d;
  for (const auto& e : events) {
    d.has_tokens = d.has_tokens || e.tokens.has_value();
    d.has_pos = d.has_pos || e.pos_tags.has_value();
    d.has_feedback = d.has_feedback || e.feedback.has_value();
  }
  d.trajectories = build_trajectories(std::move(events));
  d.stats = build_community_month_stats(d.trajectories, threads);
  return d;
}

std::vector<const LanguageModelSet*> LanguageBundle::sets() const {
  std::vector<const LanguageModelSet*> out;
  for (const auto& m : models) out.push_back(m.get());
  return out;
}

const LanguageModelSet* LanguageBundle::find(const std::string& name) const {
  for (const auto& m : models)
    if (m->vocabulary().name == name) return m.get();
  return nullptr;
}

LanguageBundle build_language(const CommunityMonthIndex& stats, const std::vector<std::string>& names,
                              unsigned threads, std::vector<std::string>* skipped) {
  LanguageBundle b;
  for (const auto& name : names) {
    try {
      b.vocabularies.push_back(std::make_unique<Vocabulary>(build_vocabulary(stats, name)));
    } catch (const std::runtime_error&) {
      if (skipped) skipped->push_back(name);
      continue;
    }
    b.models.push_back(
        std::make_unique<LanguageModelSet>(stats, *b.vocabularies.back(), Smoothing::AddOneOverV, threads));
  }
  return b;
}

namespace {

struct NamedMetric {
  std::string name;
  WindowFunction fn;
};

WindowFunction per_post(std::function<MaybeValue(const PostEvent&)> f) {
  return window_mean([f = std::move(f)](std::span<const PostEvent> traj, std::size_t t) { return f(traj[t - 1]); });
}

std::vector<NamedMetric> metric_functions(const Dataset& data, const LanguageBundle& language,
                                          const DissimilarityCache& dissim, const MetricOptions& options) {
  std::vector<NamedMetric> m;
  auto count = [](auto f) {
    return on_window_events([f](std::span<const PostEvent> w) -> MaybeValue { return static_cast<double>(f(w)); });
  };
  m.push_back({"uniq", count([](auto w) { return unique_communities(w); })});
  m.push_back({"cumnew", [](std::span<const PostEvent> traj, const Window& w) -> MaybeValue {
                 return static_cast<double>(unique_communities(traj.first(w.last)));
               }});
  m.push_back({"jumps", count([](auto w) { return jumps(w); })});
  m.push_back({"entropy", on_window_events([](auto w) -> MaybeValue { return entropy(community_distribution(w)); })});
  m.push_back({"gini", on_window_events([](auto w) -> MaybeValue { return gini_simpson(community_distribution(w)); })});
  const auto* stats = &data.stats;
  m.push_back({"logsize", per_post([stats](const PostEvent& p) { return apparent_size(p, *stats); })});
  m.push_back({"dissim", on_window_events([&dissim](auto w) { return window_dissimilarity(w, dissim); })});
  m.push_back({"gap", window_mean([](std::span<const PostEvent> traj, std::size_t t) -> MaybeValue {
                 if (t < 2) return std::nullopt;
                 return static_cast<double>(traj[t - 1].ts - traj[t - 2].ts) / static_cast<double>(kSecondsPerDay);
               })});
  for (const auto* lm : language.sets())
    m.push_back({"ce_" + lm->vocabulary().name,
                 per_post([lm](const PostEvent& p) { return lm->post_cross_entropy(p); })});
  if (data.has_tokens) {
    const auto* pronouns = &options.pronouns;
    m.push_back({"pronoun", per_post([pronouns](const PostEvent& p) -> MaybeValue {
                   return p.tokens ? pronoun_rate(*p.tokens, *pronouns) : std::nullopt;
                 })});
    m.push_back({"length", per_post([](const PostEvent& p) -> MaybeValue {
                   return p.tokens ? MaybeValue(static_cast<double>(post_length(*p.tokens))) : std::nullopt;
                 })});
  }
  if (data.has_feedback) {
    m.push_back({"fb_med", per_post([stats](const PostEvent& p) {
                   return post_outperform(p, *stats, FeedbackQuantile::Median);
                 })});
    m.push_back({"fb_p75", per_post([stats](const PostEvent& p) {
                   return post_outperform(p, *stats, FeedbackQuantile::P75);
                 })});
  }
  return m;
}

}  // namespace

MetricSeries compute_metric_series(const Dataset& data, const LanguageBundle& language, const MetricOptions& options) {
  const WindowSpec prefix_spec{options.window_size, FixedPrefix{options.prefix_len}};
  const WindowSpec life_spec{options.window_size, FullLife{options.stage_count}};
  prefix_spec.validate();
  life_spec.validate();
  const CommunityIndex community_index = build_community_user_index(data.trajectories);
  const DissimilarityCache dissim(community_index, options.dissim_min_posts);
  const auto metrics = metric_functions(data, language, dissim, options);

  std::vector<const UserTrajectory*> users;
  for (const auto& [id, traj] : data.trajectories)
    if (traj.size() >= options.prefix_len) users.push_back(&traj);

  // [user][metric] -> points
  std::vector<std::vector<std::vector<SeriesPoint>>> prefix(users.size()), stage(users.size());
  parallel_for(users.size(), options.threads, [&](std::size_t u) {
    const auto& traj = *users[u];
    for (const auto& m : metrics) {
      prefix[u].push_back(eval_window_function(traj, m.fn, prefix_spec).values);
      if (m.name == "cumnew") {
        std::vector<SeriesPoint> points;
        for (std::size_t s = 1; s <= options.stage_count; ++s) {
          const double pct = 100.0 * static_cast<double>(s) / static_cast<double>(options.stage_count);
          points.push_back({s, static_cast<double>(cumulative_new_communities_percent(traj, pct))});
        }
        stage[u].push_back(std::move(points));
      } else {
        stage[u].push_back(eval_stage_view(eval_window_function(traj, m.fn, life_spec), options.stage_count).values);
      }
    }
  });

  MetricSeries out;
  for (const auto& m : metrics) {
    out.prefix.metrics.push_back(m.name);
    out.stage.metrics.push_back(m.name);
  }
  for (std::size_t u = 0; u < users.size(); ++u) {
    for (std::size_t k = 0; k < metrics.size(); ++k) {
      out.prefix.values[metrics[k].name][users[u]->user_id] = std::move(prefix[u][k]);
      out.stage.values[metrics[k].name][users[u]->user_id] = std::move(stage[u][k]);
    }
  }
  return out;
}

void write_series_table(std::ostream& out, const SeriesTable& table, std::string_view x_kind) {
  write_series_header(out);
  std::vector<std::string> users;
  if (!table.metrics.empty() && table.values.contains(table.metrics.front()))
    for (const auto& [user, points] : table.values.at(table.metrics.front())) users.push_back(user);
  for (const auto& user : users) {
    for (const auto& metric : table.metrics) {
      const auto& by_user = table.values.at(metric);
      auto it = by_user.find(user);
      if (it != by_user.end()) write_series_rows(out, user, x_kind, metric, it->second);
    }
  }
}

SeriesTable read_series_table(std::istream& in) {
  SeriesTable t;
  std::string line;
  if (!std::getline(in, line) || line != "user,x_kind,x,metric,value,missing_flag")
    throw std::runtime_error("unexpected series header");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string user, kind, x, metric, value, missing;
    std::getline(ss, user, ',');
    std::getline(ss, kind, ',');
    std::getline(ss, x, ',');
    std::getline(ss, metric, ',');
    std::getline(ss, value, ',');
    std::getline(ss, missing, ',');
    if (metric.empty() || x.empty()) throw std::runtime_error("malformed series row at line " + std::to_string(line_no));
    if (!t.values.contains(metric)) t.metrics.push_back(metric);
    SeriesPoint p{std::stoull(x), std::nullopt};
    if (missing != "1") p.value = std::stod(value);
    t.values[metric][user].push_back(p);
  }
  return t;
}

FeatureTables build_feature_tables(const Dataset& data, const LanguageBundle& language, const FeatureOptions& options) {
  FeatureContext ctx;
  ctx.stats = &data.stats;
  ctx.language = language.sets();
  ctx.window_size = options.window_size;
  ctx.prefix_len = options.prefix_len;
  ctx.argmax_features = options.argmax_features;
  ctx.has_tokens = data.has_tokens;
  ctx.has_feedback = data.has_feedback;
  ctx.pronouns = options.pronouns;

  std::vector<const UserTrajectory*> users;
  for (const auto& [id, traj] : data.trajectories)
    if (traj.size() >= options.prefix_len) users.push_back(&traj);

  std::vector<std::pair<Range, std::size_t>> keys;
  for (std::size_t x : options.x_values) {
    keys.emplace_back(Range::First, x);
    if (x != options.prefix_len) keys.emplace_back(Range::Last, x);
  }
  std::vector<std::vector<FeatureVector>> vectors(keys.size(), std::vector<FeatureVector>(users.size()));
  parallel_for(users.size(), options.threads, [&](std::size_t u) {
    const auto prefix = compute_prefix_metrics(*users[u], ctx);
    for (std::size_t k = 0; k < keys.size(); ++k)
      vectors[k][u] = extract_features(prefix, ctx, keys[k].first, keys[k].second);
  });
  FeatureTables out;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    auto table = make_table(vectors[k]);
    table.range = keys[k].first;
    table.x = keys[k].second;
    out.emplace(keys[k], std::move(table));
  }
  return out;
}

std::string feature_table_filename(Range range, std::size_t x) {
  return "features_" + std::string(to_string(range)) + "_" + std::to_string(x) + ".csv";
}

std::vector<std::map<std::string, std::string>> curve_groupings(const std::map<std::string, UserLabel>& labels,
                                                                 const std::map<std::string, std::string>& archetypes,
                                                                 const std::vector<std::string>& users) {
  std::map<std::string, std::string> all, status, quartile, archetype;
  for (const auto& u : users) {
    all[u] = "all";
    if (auto it = labels.find(u); it != labels.end()) {
      if (it->second.status && *it->second.status != Status::Neither)
        status[u] = "status=" + std::string(to_string(*it->second.status));
      if (it->second.quartile > 0) quartile[u] = "quartile=" + std::to_string(it->second.quartile);
    }
    if (auto it = archetypes.find(u); it != archetypes.end()) archetype[u] = "archetype=" + it->second;
  }
  std::vector<std::map<std::string, std::string>> out{all};
  for (auto* g : {&status, &quartile, &archetype})
    if (!g->empty()) out.push_back(std::move(*g));
  return out;
}

void write_population_curves(std::ostream& out, const SeriesTable& table,
                             const std::vector<std::map<std::string, std::string>>& groupings,
                             const std::vector<std::string>& exclude) {
  write_curve_header(out);
  for (const auto& metric : table.metrics) {
    if (std::find(exclude.begin(), exclude.end(), metric) != exclude.end()) continue;
    for (const auto& grouping : groupings) {
      const auto curve = population_curve(table.values.at(metric), grouping);
      write_curve_rows(out, metric, curve);
    }
  }
}

SeriesTable cumulative_exploration(const TrajectoryMap& trajectories, std::size_t max_posts) {
  SeriesTable t;
  t.metrics.push_back("cumnew");
  auto& by_user = t.values["cumnew"];
  for (const auto& [user, traj] : trajectories) {
    if (traj.size() < max_posts) continue;
    auto& points = by_user[user];
    std::set<std::string_view> seen;
    for (std::size_t x = 1; x <= max_posts; ++x) {
      seen.insert(traj.events[x - 1].community);
      points.push_back({x, static_cast<double>(seen.size())});
    }
  }
  return t;
}

}  // namespace commtraj
