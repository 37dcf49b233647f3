// commtraj: multi-community trajectory analytics over a workspace directory.
//
//   commtraj synth --preset planted --users 2000 --output events.jsonl --truth truth.csv
//   commtraj -w ws ingest --input events.jsonl
//   commtraj -w ws metrics
//   commtraj -w ws labels --sof 2013-07-01
//   commtraj -w ws features
//   commtraj -w ws predict --config protocol.cfg
//   commtraj -w ws style --null-control
//   commtraj -w ws singlemulti
//   commtraj -w ws report --truth truth.csv

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "commtraj/synth.hpp"
#include "commtraj/workspace.hpp"

using namespace commtraj;

namespace {

Timestamp to_timestamp(const std::string& text, const std::string& flag) {
  auto ts = parse_timestamp(text);
  if (!ts) throw CLI::ValidationError(flag, "expected epoch seconds or an ISO-8601 date");
  return *ts;
}

void print(const StageReport& r) {
  if (r.skipped)
    std::cout << r.stage << ": up to date, skipped\n";
  else
    std::cout << r.stage << ": wrote " << r.outputs.size() << " files\n";
  for (const auto& w : r.warnings) std::cerr << r.stage << ": warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-community user trajectory analytics"};
  app.require_subcommand(1);
  Workspace ws;
  std::string workspace = "workspace";
  app.add_option("-w,--workspace", workspace, "Workspace directory")->capture_default_str();
  app.add_option("--threads", ws.threads, "Worker threads (results do not depend on it)")->capture_default_str();
  app.add_flag("--force", ws.force, "Rerun a stage even if its manifest matches");

  // ingest
  IngestOptions ingest;
  std::string cutoff;
  auto* ingest_cmd = app.add_subcommand("ingest", "Parse an event log into the workspace");
  ingest_cmd->add_option("--input", ingest.input, "events-v1 file")->required();
  ingest_cmd->add_option("--format", ingest.format, "Input format id")->capture_default_str();
  ingest_cmd->add_flag("--strict", ingest.strict, "Fail on the first malformed line");
  ingest_cmd->add_option("--cutoff", cutoff, "Drop posts at or after this time");

  // metrics
  MetricsStageOptions metrics;
  auto* metrics_cmd = app.add_subcommand("metrics", "Windowed and staged per-user metrics");
  metrics_cmd->add_option("--window-size", metrics.metrics.window_size)->capture_default_str();
  metrics_cmd->add_option("--prefix-len", metrics.metrics.prefix_len)->capture_default_str();
  metrics_cmd->add_option("--stages", metrics.metrics.stage_count)->capture_default_str();
  metrics_cmd->add_option("--vocab", metrics.vocabularies, "Vocabularies: pos, topK, full")->delimiter(',');
  metrics_cmd->add_option("--dissim-min-posts", metrics.metrics.dissim_min_posts)->capture_default_str();
  metrics_cmd->add_option("--pronouns", metrics.metrics.pronouns, "Pronoun lexicon")->delimiter(',');
  metrics_cmd->add_flag("--dump-models", metrics.dump_models, "Write per community-month model CSVs");

  // labels
  LabelConfig labels;
  std::string sof, half_rule = "months";
  auto* labels_cmd = app.add_subcommand("labels", "Departure status and activity quartiles");
  labels_cmd->add_option("--sof", sof, "Start of future")->required();
  labels_cmd->add_option("--half-rule", half_rule, "months | days")->check(CLI::IsMember({"months", "days"}));
  labels_cmd->add_option("--prefix-len", labels.prefix_len)->capture_default_str();

  // features
  FeaturesStageOptions features;
  bool no_argmax = false;
  auto* features_cmd = app.add_subcommand("features", "Prediction feature tables");
  features_cmd->add_option("--window-size", features.features.window_size)->capture_default_str();
  features_cmd->add_option("--prefix-len", features.features.prefix_len)->capture_default_str();
  features_cmd->add_option("--x-values", features.features.x_values)->delimiter(',');
  features_cmd->add_option("--vocab", features.vocabularies)->delimiter(',');
  features_cmd->add_option("--pronouns", features.features.pronouns)->delimiter(',');
  features_cmd->add_flag("--no-argmax", no_argmax, "Drop argmax/argmin window-index features");

  // predict
  PredictStageOptions predict;
  std::string config_path;
  auto* predict_cmd = app.add_subcommand("predict", "Departure and activity trials");
  predict_cmd->add_option("--config", config_path, "key=value protocol file");
  auto* p_seed = predict_cmd->add_option("--seed", predict.protocol.seed);
  auto* p_trials = predict_cmd->add_option("--trials", predict.protocol.trials);
  auto* p_train = predict_cmd->add_option("--train-size", predict.protocol.train_size);
  auto* p_test = predict_cmd->add_option("--test-size", predict.protocol.test_size);
  auto* p_val = predict_cmd->add_option("--validation-size", predict.protocol.validation_size);
  auto* p_prefix = predict_cmd->add_option("--prefix-len", predict.protocol.prefix_len);

  // style
  StyleStageOptions style;
  auto* style_cmd = app.add_subcommand("style", "Cross-community style classification");
  style_cmd->add_option("--vocab", style.vocabularies)->delimiter(',');
  style_cmd->add_option("--seed", style.triples.seed, "Orientation and split seed")->capture_default_str();
  style_cmd->add_option("--trials", style.experiment.trials)->capture_default_str();
  style_cmd->add_option("--train-size", style.experiment.train_size)->capture_default_str();
  style_cmd->add_option("--test-size", style.experiment.test_size)->capture_default_str();
  style_cmd->add_option("--posts-per-side", style.triples.posts_per_side)->capture_default_str();
  style_cmd->add_option("--cap", style.triples.max_per_user, "Max triples per user (0 = all)")->capture_default_str();
  style_cmd->add_flag("--exclude-own", style.exclude_own, "Leave the user's own posts out of the models");
  style_cmd->add_flag("--null-control", style.null_control, "Also run same-community null triples");

  // singlemulti
  SingleMultiOptions singlemulti;
  std::string quantile = "median";
  auto* sm_cmd = app.add_subcommand("singlemulti", "First-post feedback in abandoned vs returned-to communities");
  sm_cmd->add_option("--quantile", quantile, "median | p75")->check(CLI::IsMember({"median", "p75"}));

  // synth
  std::size_t users = 1000;
  std::uint64_t synth_seed = 1;
  std::string preset = "planted", output, truth;
  double style_shift = 0.2;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic event log");
  synth_cmd->add_option("--users", users)->capture_default_str();
  synth_cmd->add_option("--seed", synth_seed)->capture_default_str();
  synth_cmd->add_option("--preset", preset, "planted | style | default")
      ->check(CLI::IsMember({"planted", "style", "default"}))
      ->capture_default_str();
  synth_cmd->add_option("--style-shift", style_shift, "Community stopword shift")->capture_default_str();
  synth_cmd->add_option("--output", output, "events-v1 output file")->required();
  synth_cmd->add_option("--truth", truth, "Per-user truth CSV");

  // report
  ReportOptions report;
  std::string report_truth;
  auto* report_cmd = app.add_subcommand("report", "Population curves for every metric");
  report_cmd->add_option("--truth", report_truth, "Synth truth CSV; adds archetype groups");
  report_cmd->add_option("--exploration-posts", report.exploration_posts)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  ws.root = workspace;

  try {
    if (*ingest_cmd) {
      if (!cutoff.empty()) ingest.cutoff = to_timestamp(cutoff, "--cutoff");
      print(run_ingest(ws, ingest));
    } else if (*metrics_cmd) {
      print(run_metrics(ws, metrics));
    } else if (*labels_cmd) {
      labels.sof = to_timestamp(sof, "--sof");
      labels.half_rule = half_rule == "days" ? HalfRule::FixedDays : HalfRule::CalendarMonths;
      print(run_labels(ws, labels));
    } else if (*features_cmd) {
      features.features.argmax_features = !no_argmax;
      print(run_features(ws, features));
    } else if (*predict_cmd) {
      // Flags override the config file.
      ProtocolConfig flags = predict.protocol;
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw std::runtime_error("cannot open " + config_path);
        predict.protocol = ProtocolConfig::parse(in);
      }
      if (*p_seed) predict.protocol.seed = flags.seed;
      if (*p_trials) predict.protocol.trials = flags.trials;
      if (*p_train) predict.protocol.train_size = flags.train_size;
      if (*p_test) predict.protocol.test_size = flags.test_size;
      if (*p_val) predict.protocol.validation_size = flags.validation_size;
      if (*p_prefix) predict.protocol.prefix_len = flags.prefix_len;
      print(run_predict(ws, predict));
    } else if (*style_cmd) {
      style.experiment.seed = style.triples.seed;
      print(run_style(ws, style));
    } else if (*sm_cmd) {
      singlemulti.quantile = quantile == "p75" ? FeedbackQuantile::P75 : FeedbackQuantile::Median;
      print(run_singlemulti(ws, singlemulti));
    } else if (*synth_cmd) {
      synth::PopulationSpec spec;
      if (preset == "planted") spec = synth::planted_spec(users);
      else if (preset == "style") spec = synth::style_spec(users, style_shift);
      else spec.users = users;
      spec.style_shift = style_shift;
      const auto out = synth::generate(spec, synth_seed, ws.threads);
      std::ofstream events(output);
      if (!events) throw std::runtime_error("cannot write " + output);
      write_events(events, out.events);
      if (!truth.empty()) {
        std::ofstream t(truth);
        if (!t) throw std::runtime_error("cannot write " + truth);
        synth::write_truth(t, out.truth);
      }
      std::cout << "synth: " << out.truth.size() << " users, " << out.events.size() << " posts\n";
    } else if (*report_cmd) {
      if (!report_truth.empty()) report.truth = report_truth;
      print(run_report(ws, report));
    }
  } catch (const MissingArtifact& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
