#ifndef ACIL_HARNESS_HPP
#define ACIL_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acil/classifier.hpp"
#include "acil/datastream.hpp"
#include "acil/selection.hpp"

namespace acil {

struct ExperimentConfig {
  StreamConfig stream;
  std::filesystem::path dataset_path;  // required when stream.source == File
  TrainConfig train;
  SelectionOptions selection;
  Strategy strategy = Strategy::Acil;
  int budget = 100;
  int num_seeds = 1;
  std::uint64_t seed = 0;  // replica r uses seed + r
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints

  void validate() const;
};

struct MetricsRecord {
  std::string strategy;
  std::uint64_t seed = 0;
  int episode = 0;
  double incremental_accuracy = 0.0;
  double retention = 0.0;
  int annotated_this_episode = 0;
  std::int64_t cumulative_annotated = 0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

struct SeedFailure {
  std::string strategy;
  std::uint64_t seed = 0;
  int episode = 0;
  std::string message;
};

/// Everything one replica produced, for inspection by tests and tools.
struct ReplicaTrace {
  std::vector<MetricsRecord> records;
  AnnotationLedger ledger;
  std::vector<ExemplarSet> exemplar_sets;              // E_n per episode
  std::vector<std::vector<double>> epoch_losses;       // per episode
  std::vector<double> initial_losses;                  // per episode
  std::vector<std::vector<double>> episode_accuracies; // per episode: accuracy on tests 0..n
};

struct RunResult {
  std::vector<MetricsRecord> records;
  std::vector<SeedFailure> failures;
};

using Predictor = std::function<ClassId(const Sample&)>;

/// Fraction of `samples` predicted correctly.
double test_accuracy(const Predictor& predict, std::span<const Sample> samples);
double test_accuracy(const Classifier& model, std::span<const Sample> samples);

/// Unweighted mean over `episodes` of each episode's test accuracy.
double incremental_accuracy(const Predictor& predict, std::span<const EpisodeData> episodes);
double incremental_accuracy(const Classifier& model, std::span<const EpisodeData> episodes);

/// Mean of per-episode accuracies.
double incremental_accuracy(std::span<const double> per_episode_accuracy);

/// Accuracy on the first episode's test set.
double retention(const Classifier& model, const EpisodeData& first_episode);

/// Argmax prediction over every class the model knows.
Predictor argmax_predictor(const Classifier& model);

/// Build the stream for one replica seed (synthetic or file source).
std::vector<EpisodeData> build_stream(const ExperimentConfig& cfg, std::uint64_t replica_seed);

/// Run the episode loop for one replica on a prepared stream.
/// Throws DivergenceError if training diverges.
ReplicaTrace run_replica(const ExperimentConfig& cfg, std::uint64_t replica_seed,
                         const std::vector<EpisodeData>& stream);

/// All replicas. A diverged replica is logged, recorded in `failures`, and its
/// records are dropped.
RunResult run_experiment(const ExperimentConfig& cfg);

struct AggregateRow {
  std::string strategy;
  int episode = 0;
  int num_seeds = 0;
  double accuracy_mean = 0.0, accuracy_std = 0.0;
  double retention_mean = 0.0, retention_std = 0.0;
  double annotated_mean = 0.0, annotated_std = 0.0;
  double cumulative_mean = 0.0, cumulative_std = 0.0;
};

/// Sample mean and sample standard deviation (n - 1 denominator; 0 for one value).
std::pair<double, double> mean_and_std(std::span<const double> values);

/// One row per (strategy, episode), strategies in order of first appearance.
std::vector<AggregateRow> aggregate(std::span<const MetricsRecord> records);

/// Final-episode rows only, one per strategy.
std::vector<AggregateRow> final_episode_summary(std::span<const MetricsRecord> records);

}  // namespace acil

#endif  // ACIL_HARNESS_HPP
