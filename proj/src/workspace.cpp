#include "commtraj/workspace.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

#include "commtraj/feedback.hpp"

namespace commtraj {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

// Bookkeeping for one stage: inputs are hashed as they are declared, outputs
// as they are written, and the manifest is compared before any work is done.
class StageRun {
 public:
  StageRun(const Workspace& ws, std::string stage, json config)
      : ws_(ws), stage_(std::move(stage)), config_(std::move(config)) {
    report_.stage = stage_;
  }

  fs::path dir() const { return ws_.root / stage_; }

  /// An artifact of an earlier stage; throws MissingArtifact if absent.
  fs::path input(const std::string& producer, const std::string& name) {
    const fs::path path = ws_.root / producer / name;
    if (!fs::exists(path))
      throw MissingArtifact(stage_ + ": missing " + (fs::path(producer) / name).string() + "; run `commtraj " +
                            producer + "` first");
    inputs_[(fs::path(producer) / name).generic_string()] = sha256_file(path);
    return path;
  }

  /// Declares an upstream artifact that is used only when present.
  std::optional<fs::path> optional_input(const std::string& producer, const std::string& name) {
    if (!fs::exists(ws_.root / producer / name)) return std::nullopt;
    return input(producer, name);
  }

  /// A file outside the workspace; recorded by file name and digest only.
  void external_input(const std::string& role, const fs::path& path) {
    if (!fs::exists(path)) throw std::runtime_error(stage_ + ": input file " + path.string() + " does not exist");
    inputs_["external:" + role] = path.filename().string() + ":" + sha256_file(path);
  }

  bool up_to_date() {
    if (ws_.force) return false;
    const fs::path manifest = dir() / "manifest.json";
    if (!fs::exists(manifest)) return false;
    json m;
    try {
      m = json::parse(read_file(manifest));
    } catch (const json::exception&) {
      return false;
    }
    if (m.value("config_hash", "") != config_hash() || m.value("inputs", json::object()) != json(inputs_)) return false;
    const json outputs = m.value("outputs", json::object());
    for (const auto& [name, digest] : outputs.items()) {
      const fs::path path = ws_.root / name;
      if (!fs::exists(path) || sha256_file(path) != digest.get<std::string>()) return false;
      report_.outputs.push_back(name);
    }
    report_.skipped = true;
    return true;
  }

  void write(const std::string& name, const std::string& content) {
    const std::string rel = (fs::path(stage_) / name).generic_string();
    write_file(ws_.root / rel, content);
    outputs_[rel] = sha256_hex(content);
    report_.outputs.push_back(rel);
  }

  void warn(std::string message) { report_.warnings.push_back(std::move(message)); }

  StageReport finish() {
    json m;
    m["stage"] = stage_;
    m["config"] = config_;
    m["config_hash"] = config_hash();
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    write_file(dir() / "manifest.json", m.dump(2) + "\n");
    return report_;
  }

  StageReport skipped() const { return report_; }

 private:
  std::string config_hash() const { return sha256_hex(config_.dump()); }

  const Workspace& ws_;
  std::string stage_;
  json config_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
  StageReport report_;
};

Dataset load_events(const fs::path& path, unsigned threads) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  ParseOptions po;
  po.mode = ParseMode::Strict;
  return make_dataset(parse_events(in, kEventsFormatV1, po).events, threads);
}

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream out;
  fn(out);
  return out.str();
}

std::string quantile_name(FeedbackQuantile q) { return q == FeedbackQuantile::Median ? "median" : "p75"; }

}  // namespace

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

Dataset load_workspace_dataset(const Workspace& ws) {
  const fs::path path = ws.root / "ingest" / "events.jsonl";
  if (!fs::exists(path)) throw MissingArtifact("missing ingest/events.jsonl; run `commtraj ingest` first");
  return load_events(path, ws.threads);
}

StageReport run_ingest(const Workspace& ws, const IngestOptions& options) {
  json config{{"format", options.format}, {"strict", options.strict}};
  if (options.cutoff) config["cutoff"] = format_timestamp(*options.cutoff);
  StageRun run(ws, "ingest", config);
  run.external_input("events", options.input);
  if (run.up_to_date()) return run.skipped();

  std::ifstream in(options.input);
  if (!in) throw std::runtime_error("cannot open " + options.input.string());
  ParseOptions po;
  po.mode = options.strict ? ParseMode::Strict : ParseMode::Lenient;
  po.cutoff = options.cutoff;
  auto parsed = parse_events(in, options.format, po);
  if (!parsed.diagnostics.empty())
    run.warn(std::to_string(parsed.diagnostics.size()) + " malformed lines skipped (see ingest/diagnostics.txt)");
  const Dataset data = make_dataset(std::move(parsed.events), ws.threads);

  run.write("events.jsonl", render([&](std::ostream& out) { write_trajectories(out, data.trajectories); }));
  run.write("diagnostics.txt", render([&](std::ostream& out) {
              for (const auto& d : parsed.diagnostics) out << "line " << d.line << ": " << d.message << '\n';
            }));
  run.write("community_months.csv", render([&](std::ostream& out) {
              out << "community,month,posts,tokens,feedback_n,feedback_median,feedback_p75\n";
              for (const auto& [key, s] : data.stats) {
                out << s.community_id << ',' << to_string(s.month) << ',' << s.post_count << ',' << s.total_tokens
                    << ',' << s.feedback_values.size() << ',';
                if (auto q = month_quantiles(s)) out << format_double(q->median) << ',' << format_double(q->p75);
                else out << ',';
                out << '\n';
              }
            }));
  std::size_t posts = 0, with_prefix = 0;
  std::set<std::string> communities;
  for (const auto& [user, traj] : data.trajectories) {
    posts += traj.size();
    with_prefix += traj.size() >= 50;
    for (const auto& e : traj.events) communities.insert(e.community);
  }
  json summary{{"users", data.trajectories.size()},
               {"posts", posts},
               {"communities", communities.size()},
               {"community_months", data.stats.size()},
               {"users_with_50_posts", with_prefix},
               {"has_tokens", data.has_tokens},
               {"has_pos", data.has_pos},
               {"has_feedback", data.has_feedback},
               {"malformed_lines", parsed.diagnostics.size()}};
  run.write("summary.json", summary.dump(2) + "\n");
  return run.finish();
}

StageReport run_metrics(const Workspace& ws, const MetricsStageOptions& options) {
  const auto& m = options.metrics;
  json config{{"window_size", m.window_size},   {"prefix_len", m.prefix_len},
              {"stage_count", m.stage_count},   {"dissim_min_posts", m.dissim_min_posts},
              {"pronouns", m.pronouns},         {"vocabularies", options.vocabularies},
              {"dump_models", options.dump_models}};
  StageRun run(ws, "metrics", config);
  const auto events = run.input("ingest", "events.jsonl");
  if (run.up_to_date()) return run.skipped();

  const Dataset data = load_events(events, ws.threads);
  std::vector<std::string> skipped;
  const LanguageBundle language = build_language(data.stats, options.vocabularies, ws.threads, &skipped);
  for (const auto& name : skipped) run.warn("vocabulary '" + name + "' skipped: the data has no tokens for it");
  MetricOptions mo = m;
  mo.threads = ws.threads;
  const auto series = compute_metric_series(data, language, mo);
  run.write("series_prefix.csv", render([&](std::ostream& out) { write_series_table(out, series.prefix, "window"); }));
  run.write("series_stage.csv", render([&](std::ostream& out) { write_series_table(out, series.stage, "stage"); }));
  for (const auto& v : language.vocabularies)
    run.write("vocab_" + v->name + ".txt", render([&](std::ostream& out) { write_vocabulary(out, *v); }));
  if (options.dump_models) {
    for (const auto* lm : language.sets()) {
      run.write("lm_" + lm->vocabulary().name + ".csv", render([&](std::ostream& out) {
                  out << "community,month,token,probability\n";
                  for (const auto& [key, stats] : data.stats) {
                    const auto* model = lm->find(key.community, key.month);
                    if (!model || !model->available()) continue;
                    for (const auto& [token, p] : model->distribution())
                      out << key.community << ',' << to_string(key.month) << ',' << token << ',' << format_double(p)
                          << '\n';
                  }
                }));
    }
  }
  return run.finish();
}

StageReport run_labels(const Workspace& ws, const LabelConfig& options) {
  json config{{"sof", format_timestamp(options.sof)},
              {"half_rule", options.half_rule == HalfRule::CalendarMonths ? "months" : "days"},
              {"half_months", options.half_months},
              {"half_days", options.half_days},
              {"prefix_len", options.prefix_len}};
  StageRun run(ws, "labels", config);
  const auto events = run.input("ingest", "events.jsonl");
  if (run.up_to_date()) return run.skipped();

  const Dataset data = load_events(events, ws.threads);
  const auto labels = label_users(data.trajectories, options);
  run.write("labels.csv", render([&](std::ostream& out) { write_labels(out, labels); }));
  std::map<std::string, std::size_t> status_counts;
  std::map<int, std::size_t> quartile_counts;
  for (const auto& [user, l] : labels) {
    ++status_counts[l.status ? std::string(to_string(*l.status)) : "ineligible"];
    ++quartile_counts[l.quartile];
  }
  run.write("summary.csv", render([&](std::ostream& out) {
              out << "kind,value,users\n";
              for (const auto& [s, n] : status_counts) out << "status," << s << ',' << n << '\n';
              for (const auto& [q, n] : quartile_counts) out << "quartile," << q << ',' << n << '\n';
            }));
  return run.finish();
}

StageReport run_features(const Workspace& ws, const FeaturesStageOptions& options) {
  const auto& f = options.features;
  json config{{"window_size", f.window_size}, {"prefix_len", f.prefix_len},
              {"x_values", f.x_values},       {"argmax_features", f.argmax_features},
              {"pronouns", f.pronouns},       {"vocabularies", options.vocabularies}};
  StageRun run(ws, "features", config);
  const auto events = run.input("ingest", "events.jsonl");
  if (run.up_to_date()) return run.skipped();

  const Dataset data = load_events(events, ws.threads);
  std::vector<std::string> skipped;
  const LanguageBundle language = build_language(data.stats, options.vocabularies, ws.threads, &skipped);
  for (const auto& name : skipped) run.warn("vocabulary '" + name + "' skipped: the data has no tokens for it");
  FeatureOptions fo = f;
  fo.threads = ws.threads;
  const auto tables = build_feature_tables(data, language, fo);
  for (const auto& [key, table] : tables)
    run.write(feature_table_filename(key.first, key.second),
              render([&](std::ostream& out) { write_feature_table(out, table); }));
  return run.finish();
}

StageReport run_predict(const Workspace& ws, const PredictStageOptions& options) {
  const auto& p = options.protocol;
  json config{{"train_size", p.train_size},
              {"test_size", p.test_size},
              {"validation_size", p.validation_size},
              {"trials", p.trials},
              {"seed", p.seed},
              {"prefix_len", p.prefix_len},
              {"c_grid", p.c_grid},
              {"epsilon_grid", p.epsilon_grid},
              {"x_values", p.x_values},
              {"feature_sets", p.feature_sets},
              {"departure", p.departure},
              {"activity", p.activity},
              {"sweeps", p.sweeps},
              {"shuffled_control", p.shuffled_control}};
  StageRun run(ws, "predict", config);
  const auto labels_path = run.input("labels", "labels.csv");
  std::vector<std::pair<std::pair<Range, std::size_t>, fs::path>> table_paths;
  auto want = [&](Range r, std::size_t x) {
    table_paths.push_back({{r, x}, run.input("features", feature_table_filename(r, x))});
  };
  want(Range::First, p.prefix_len);
  if (p.sweeps) {
    for (std::size_t x : p.x_values) {
      if (x == p.prefix_len) continue;
      want(Range::First, x);
      want(Range::Last, x);
    }
  }
  if (run.up_to_date()) return run.skipped();

  std::ifstream labels_in(labels_path);
  const auto labels = read_labels(labels_in);
  FeatureTables tables;
  for (const auto& [key, path] : table_paths) {
    std::ifstream in(path);
    tables.emplace(key, read_feature_table(in, key.first, key.second));
  }
  ProtocolConfig pc = p;
  pc.threads = ws.threads;
  const auto results = run_trial_protocol(tables, labels, pc);
  for (const auto& w : results.warnings) run.warn(w);
  run.write("results.csv", render([&](std::ostream& out) { write_results(out, results.rows); }));
  run.write("summary.csv", render([&](std::ostream& out) { write_summary(out, results.summary); }));
  run.write("warnings.txt", render([&](std::ostream& out) {
              for (const auto& w : results.warnings) out << w << '\n';
            }));
  return run.finish();
}

StageReport run_style(const Workspace& ws, const StyleStageOptions& options) {
  const auto& e = options.experiment;
  json config{{"vocabularies", options.vocabularies},
              {"posts_per_side", options.triples.posts_per_side},
              {"max_per_user", options.triples.max_per_user},
              {"seed", options.triples.seed},
              {"train_size", e.train_size},
              {"test_size", e.test_size},
              {"dev_share", e.dev_share},
              {"trials", e.trials},
              {"split_seed", e.seed},
              {"c_grid", e.c_grid},
              {"exclude_own", options.exclude_own},
              {"null_control", options.null_control}};
  StageRun run(ws, "style", config);
  const auto events = run.input("ingest", "events.jsonl");
  if (run.up_to_date()) return run.skipped();

  const Dataset data = load_events(events, ws.threads);
  std::vector<std::string> skipped;
  const LanguageBundle language = build_language(data.stats, options.vocabularies, ws.threads, &skipped);
  for (const auto& name : skipped) run.warn("vocabulary '" + name + "' skipped: the data has no tokens for it");
  if (language.models.empty()) throw std::runtime_error("style: no usable vocabulary; the data carries no tokens");

  StyleConfig sc = e;
  sc.threads = ws.threads;
  // Outputs are buffered so a failed experiment leaves no partial stage.
  std::vector<std::pair<std::string, std::string>> files;
  auto experiment = [&](const std::vector<StyleTriple>& triples, const std::string& prefix) {
    std::vector<StyleDataset> datasets;
    std::string diagnostics;
    for (const auto* lm : language.sets()) {
      StyleContext ctx;
      ctx.stats = &data.stats;
      ctx.models = lm;
      if (options.exclude_own) ctx.exclude_own = &data.trajectories;
      datasets.push_back(build_style_dataset(triples, ctx, ws.threads));
      for (const auto& d : datasets.back().diagnostics) diagnostics += lm->vocabulary().name + ": " + d + "\n";
      if (!datasets.back().diagnostics.empty())
        run.warn(prefix + lm->vocabulary().name + ": " + std::to_string(datasets.back().diagnostics.size()) +
                 " triples dropped");
    }
    StyleResults results;
    try {
      results = run_style_experiment(datasets, sc);
    } catch (const std::runtime_error& err) {
      throw std::runtime_error(std::string(err.what()) + "; lower --train-size/--test-size or add users");
    }
    files.emplace_back(prefix + "results.csv", render([&](std::ostream& out) { write_style_results(out, results.rows); }));
    files.emplace_back(prefix + "summary.csv",
                       render([&](std::ostream& out) { write_style_summary(out, results.summary); }));
    files.emplace_back(prefix + "diagnostics.txt", diagnostics);
  };

  const auto triples = build_triples(data.trajectories, options.triples);
  files.emplace_back("triples.csv", render([&](std::ostream& out) {
                       out << "user,community_a,community_b,flipped\n";
                       for (const auto& t : triples)
                         out << t.user_id << ',' << t.community_a << ',' << t.community_b << ',' << (t.flipped ? 1 : 0)
                             << '\n';
                     }));
  experiment(triples, "");
  if (options.null_control) experiment(build_null_triples(data.trajectories, options.triples), "null_");
  for (const auto& [name, content] : files) run.write(name, content);
  return run.finish();
}

StageReport run_singlemulti(const Workspace& ws, const SingleMultiOptions& options) {
  StageRun run(ws, "singlemulti", json{{"quantile", quantile_name(options.quantile)}});
  const auto events = run.input("ingest", "events.jsonl");
  const auto labels_path = run.optional_input("labels", "labels.csv");
  if (run.up_to_date()) return run.skipped();

  const Dataset data = load_events(events, ws.threads);
  run.write("partition.csv", render([&](std::ostream& out) {
              out << "user,single,multi\n";
              for (const auto& [user, traj] : data.trajectories) {
                const auto p = single_multi_partition(traj);
                out << user << ',' << p.single << ',' << p.multi << '\n';
              }
            }));
  const auto all = first_post_feedback_comparison(data.trajectories, data.stats, options.quantile);
  run.write("first_post.csv", render([&](std::ostream& out) {
              out << "user,side,mean_indicator\n";
              for (const auto& p : all.pairs) {
                out << p.user << ",single," << format_double(p.single_mean) << '\n';
                out << p.user << ",multi," << format_double(p.multi_mean) << '\n';
              }
            }));

  std::vector<std::pair<std::string, FirstPostComparison>> groups{{"all", all}};
  if (labels_path) {
    std::ifstream in(*labels_path);
    const auto labels = read_labels(in);
    std::map<int, TrajectoryMap> by_quartile;
    for (const auto& [user, traj] : data.trajectories)
      if (auto it = labels.find(user); it != labels.end() && it->second.quartile > 0)
        by_quartile[it->second.quartile].emplace(user, traj);
    for (const auto& [q, trajs] : by_quartile)
      groups.emplace_back("quartile=" + std::to_string(q),
                          first_post_feedback_comparison(trajs, data.stats, options.quantile));
  }
  run.write("summary.csv", render([&](std::ostream& out) {
              out << "group,n,single_mean,multi_mean,mean_difference,t,p,zero_variance\n";
              for (const auto& [name, c] : groups) {
                out << name << ',' << c.pairs.size() << ',' << format_double(c.single_mean) << ','
                    << format_double(c.multi_mean) << ',';
                if (c.t_test)
                  out << format_double(c.t_test->mean_difference) << ',' << format_double(c.t_test->t) << ','
                      << format_double(c.t_test->p) << ',' << (c.t_test->zero_variance ? 1 : 0);
                else
                  out << ",,,";
                out << '\n';
              }
            }));
  if (!all.t_test) run.warn("fewer than two users have both single- and multi-post communities with feedback");
  return run.finish();
}

StageReport run_report(const Workspace& ws, const ReportOptions& options) {
  StageRun run(ws, "report", json{{"exploration_posts", options.exploration_posts}, {"truth", options.truth.has_value()}});
  const auto events = run.input("ingest", "events.jsonl");
  const auto prefix_path = run.input("metrics", "series_prefix.csv");
  const auto stage_path = run.input("metrics", "series_stage.csv");
  const auto labels_path = run.input("labels", "labels.csv");
  if (options.truth) run.external_input("truth", *options.truth);
  if (run.up_to_date()) return run.skipped();

  std::ifstream labels_in(labels_path);
  const auto labels = read_labels(labels_in);
  std::map<std::string, std::string> archetypes;
  if (options.truth) {
    std::ifstream in(*options.truth);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string user, archetype;
      std::getline(ss, user, ',');
      std::getline(ss, archetype, ',');
      if (!user.empty()) archetypes[user] = archetype;
    }
  }
  auto users_of = [](const SeriesTable& t) {
    std::vector<std::string> users;
    if (!t.metrics.empty())
      for (const auto& [u, points] : t.values.at(t.metrics.front())) users.push_back(u);
    return users;
  };
  // Full-vocabulary cross-entropy is confounded with community volume, so it
  // stays out of the cross-community curves.
  const std::vector<std::string> exclude{"ce_full"};
  std::ifstream prefix_in(prefix_path), stage_in(stage_path);
  const auto prefix = read_series_table(prefix_in);
  const auto stage = read_series_table(stage_in);
  run.write("curves_prefix.csv", render([&](std::ostream& out) {
              write_population_curves(out, prefix, curve_groupings(labels, archetypes, users_of(prefix)), exclude);
            }));
  run.write("curves_stage.csv", render([&](std::ostream& out) {
              write_population_curves(out, stage, curve_groupings(labels, archetypes, users_of(stage)), exclude);
            }));
  const Dataset data = load_events(events, ws.threads);
  const auto exploration = cumulative_exploration(data.trajectories, options.exploration_posts);
  run.write("curves_exploration.csv", render([&](std::ostream& out) {
              write_population_curves(out, exploration,
                                      curve_groupings(labels, archetypes, users_of(exploration)));
            }));
  return run.finish();
}

}  // namespace commtraj
