#pragma once

// Workspace stages behind the command-line tool. Each stage reads the
// artifacts of earlier stages, writes its own directory and records a
// manifest.json with the config hash and SHA-256 digests of every input and
// output. A stage whose manifest still matches is skipped.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "commtraj/feedback.hpp"
#include "commtraj/labeling.hpp"
#include "commtraj/pipeline.hpp"
#include "commtraj/prediction.hpp"
#include "commtraj/style.hpp"

namespace commtraj {

/// An upstream artifact is missing; the message names the stage to run.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

struct Workspace {
  std::filesystem::path root;
  unsigned threads = 1;
  bool force = false;  // rerun even when the manifest matches
};

struct StageReport {
  std::string stage;
  bool skipped = false;
  std::vector<std::string> outputs;   // relative to the workspace
  std::vector<std::string> warnings;
};

struct IngestOptions {
  std::filesystem::path input;
  std::string format = std::string(kEventsFormatV1);
  bool strict = false;
  std::optional<Timestamp> cutoff;
};

struct MetricsStageOptions {
  MetricOptions metrics;
  std::vector<std::string> vocabularies = default_vocabulary_names();
  bool dump_models = false;  // per community-month token probabilities
};

struct FeaturesStageOptions {
  FeatureOptions features;
  std::vector<std::string> vocabularies = default_vocabulary_names();
};

struct PredictStageOptions {
  ProtocolConfig protocol;
};

struct StyleStageOptions {
  std::vector<std::string> vocabularies{"pos", "top100", "top500"};
  TripleOptions triples;
  StyleConfig experiment;
  bool exclude_own = false;
  bool null_control = false;
};

struct SingleMultiOptions {
  FeedbackQuantile quantile = FeedbackQuantile::Median;
};

struct ReportOptions {
  std::optional<std::filesystem::path> truth;  // synth truth CSV for archetype groups
  std::size_t exploration_posts = 50;          // x range of the cumulative-exploration curve
};

StageReport run_ingest(const Workspace& ws, const IngestOptions& options);
StageReport run_metrics(const Workspace& ws, const MetricsStageOptions& options);
StageReport run_labels(const Workspace& ws, const LabelConfig& options);
StageReport run_features(const Workspace& ws, const FeaturesStageOptions& options);
StageReport run_predict(const Workspace& ws, const PredictStageOptions& options);
StageReport run_style(const Workspace& ws, const StyleStageOptions& options);
StageReport run_singlemulti(const Workspace& ws, const SingleMultiOptions& options);
StageReport run_report(const Workspace& ws, const ReportOptions& options);

/// Loads the normalized events written by the ingest stage.
Dataset load_workspace_dataset(const Workspace& ws);

}  // namespace commtraj
