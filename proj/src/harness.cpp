#include "acil/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "acil/log.hpp"
#include "acil/random.hpp"

namespace acil {

void ExperimentConfig::validate() const {
  if (budget < 1) throw ConfigError("budget must be >= 1", "budget");
  if (num_seeds < 1) throw ConfigError("num_seeds must be >= 1", "num_seeds");
  if (stream.source == StreamSource::File && dataset_path.empty())
    throw ConfigError("stream.path is required for the file source", "stream.path");
  if (selection.rainbow_copies < 1)
    throw ConfigError("selection.rainbow_copies must be >= 1", "selection.rainbow_copies");
  if (!(selection.rainbow_noise >= 0.0))
    throw ConfigError("selection.rainbow_noise must be >= 0", "selection.rainbow_noise");
  if (selection.kmeans_max_iterations < 1)
    throw ConfigError("selection.kmeans_max_iterations must be >= 1",
                      "selection.kmeans_max_iterations");
  stream.validate();
  train.validate();
}

double test_accuracy(const Predictor& predict, std::span<const Sample> samples) {
  if (samples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& s : samples)
    if (predict(s) == s.true_label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

double test_accuracy(const Classifier& model, std::span<const Sample> samples) {
  return accuracy(model, samples);
}

double incremental_accuracy(std::span<const double> per_episode_accuracy) {
  if (per_episode_accuracy.empty()) return 0.0;
  double sum = 0.0;
  for (double a : per_episode_accuracy) sum += a;
  return sum / static_cast<double>(per_episode_accuracy.size());
}

double incremental_accuracy(const Predictor& predict, std::span<const EpisodeData> episodes) {
  std::vector<double> acc;
  for (const auto& ep : episodes) acc.push_back(test_accuracy(predict, ep.test));
  return incremental_accuracy(acc);
}

double incremental_accuracy(const Classifier& model, std::span<const EpisodeData> episodes) {
  std::vector<double> acc;
  for (const auto& ep : episodes) acc.push_back(accuracy(model, ep.test));
  return incremental_accuracy(acc);
}

double retention(const Classifier& model, const EpisodeData& first_episode) {
  return accuracy(model, first_episode.test);
}

Predictor argmax_predictor(const Classifier& model) {
  return [&model](const Sample& s) {
    Eigen::Index best = 0;
    model.logits(s.features).col(0).maxCoeff(&best);
    return model.classes()[static_cast<std::size_t>(best)];
  };
}

std::vector<EpisodeData> build_stream(const ExperimentConfig& cfg, std::uint64_t replica_seed) {
  StreamConfig sc = cfg.stream;
  sc.seed = derive_seed(replica_seed, 0, "stream");
  if (sc.source == StreamSource::File) return load_file_stream(cfg.dataset_path, sc);
  return generate_synthetic_stream(sc);
}

namespace {

void save_snapshot(const ExperimentConfig& cfg, std::uint64_t seed, int episode,
                   const Classifier& model) {
  if (cfg.checkpoint_dir.empty()) return;
  std::filesystem::create_directories(cfg.checkpoint_dir);
  const auto path = cfg.checkpoint_dir / (std::string(strategy_name(cfg.strategy)) + "_seed" +
                                          std::to_string(seed) + "_ep" + std::to_string(episode) +
                                          ".ckpt");
  std::ofstream out(path);
  save_checkpoint(out, model);
}

}  // namespace

ReplicaTrace run_replica(const ExperimentConfig& cfg, std::uint64_t replica_seed,
                         const std::vector<EpisodeData>& stream) {
  cfg.validate();
  const Strategy strategy = cfg.strategy;
  const bool full = is_full_annotation(strategy);
  const bool warm = strategy == Strategy::Finetuning || cfg.train.warm_start;
  const std::string name(strategy_name(strategy));

  ReplicaTrace trace;
  std::vector<Sample> exemplars;  // E_{n-1}
  std::optional<ModelSnapshot> snapshot;
  std::optional<Classifier> model;

  for (std::size_t n = 0; n < stream.size(); ++n) {
    const int episode = static_cast<int>(n);
    EpisodeData ep = stream[n];
    ep.incoming_exemplars = exemplars;

    // Purchase labels: X^L_n always, X^U_n for full-annotation strategies.
    trace.ledger.charge(episode, std::span<Sample>(ep.labeled));
    std::vector<Sample> train_labeled = ep.labeled;
    if (full) {
      trace.ledger.charge(episode, std::span<Sample>(ep.unlabeled));
      train_labeled.insert(train_labeled.end(), ep.unlabeled.begin(), ep.unlabeled.end());
    }

    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(replica_seed, 0, "train", episode);
    const std::span<const Sample> train_exemplars =
        strategy == Strategy::Finetuning ? std::span<const Sample>() : std::span<const Sample>(exemplars);
    TrainOutcome outcome =
        train_model(warm && model ? &*model : nullptr, train_labeled, train_exemplars,
                    snapshot ? &*snapshot : nullptr, tc);
    trace.epoch_losses.push_back(outcome.epoch_losses);
    trace.initial_losses.push_back(outcome.initial_loss);

    // Select E_n and charge whatever was not yet annotated.
    ExemplarSet selected;
    if (strategy != Strategy::Finetuning) {
      const std::size_t pool = is_al_baseline(strategy) ? ep.unlabeled.size()
                               : full ? ep.labeled.size() + ep.unlabeled.size() + ep.incoming_exemplars.size()
                                      : ep.unlabeled.size() + ep.incoming_exemplars.size();
      if (static_cast<std::size_t>(cfg.budget) > pool)
        log::warn(name, " seed ", replica_seed, " episode ", episode, ": budget ", cfg.budget,
                  " exceeds candidate pool ", pool, "; exemplar set saturates");
      SelectionContext ctx;
      ctx.episode = &ep;
      ctx.model = &outcome.model;
      ctx.snapshot = snapshot ? &*snapshot : nullptr;
      ctx.budget = cfg.budget;
      ctx.seed = derive_seed(replica_seed, 0, "select", episode);
      ctx.options = cfg.selection;
      selected = select_exemplars(strategy, ctx);
    }
    trace.ledger.charge(episode, std::span<Sample>(selected.members));

    // Metrics over test sets 0..n.
    std::vector<double> acc;
    for (std::size_t m = 0; m <= n; ++m) acc.push_back(accuracy(outcome.model, stream[m].test));
    MetricsRecord rec;
    rec.strategy = name;
    rec.seed = replica_seed;
    rec.episode = episode;
    rec.incremental_accuracy = incremental_accuracy(acc);
    rec.retention = acc.front();
    rec.annotated_this_episode = trace.ledger.per_episode_counts()[n];
    rec.cumulative_annotated = trace.ledger.total();
    trace.records.push_back(rec);
    trace.episode_accuracies.push_back(std::move(acc));

    save_snapshot(cfg, replica_seed, episode, outcome.model);
    exemplars = selected.members;
    trace.exemplar_sets.push_back(std::move(selected));
    snapshot = outcome.snapshot;
    model = std::move(outcome.model);
  }
  return trace;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  RunResult result;
  std::optional<Dataset> file_data;
  if (cfg.stream.source == StreamSource::File) file_data = read_dataset_file(cfg.dataset_path);

  for (int r = 0; r < cfg.num_seeds; ++r) {
    const std::uint64_t replica_seed = cfg.seed + static_cast<std::uint64_t>(r);
    std::vector<EpisodeData> stream;
    if (file_data) {
      StreamConfig sc = cfg.stream;
      sc.seed = derive_seed(replica_seed, 0, "stream");
      stream = split_dataset_stream(*file_data, sc);
    } else {
      stream = build_stream(cfg, replica_seed);
    }
    try {
      ReplicaTrace trace = run_replica(cfg, replica_seed, stream);
      result.records.insert(result.records.end(), trace.records.begin(), trace.records.end());
    } catch (const DivergenceError& e) {
      const std::string name(strategy_name(cfg.strategy));
      log::error(name, " seed ", replica_seed, " diverged (epoch ", e.epoch(), "): ", e.what(),
                 "; seed excluded from aggregates");
      result.failures.push_back({name, replica_seed, e.epoch(), e.what()});
    }
  }
  return result;
}

std::pair<double, double> mean_and_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

std::vector<AggregateRow> aggregate(std::span<const MetricsRecord> records) {
  std::vector<std::string> order;
  std::map<std::pair<std::string, int>, std::vector<const MetricsRecord*>> cells;
  for (const auto& r : records) {
    if (std::find(order.begin(), order.end(), r.strategy) == order.end()) order.push_back(r.strategy);
    cells[{r.strategy, r.episode}].push_back(&r);
  }
  std::vector<AggregateRow> rows;
  for (const auto& strategy : order) {
    for (const auto& [key, group] : cells) {
      if (key.first != strategy) continue;
      std::vector<double> acc, ret, ann, cum;
      for (const auto* r : group) {
        acc.push_back(r->incremental_accuracy);
        ret.push_back(r->retention);
        ann.push_back(static_cast<double>(r->annotated_this_episode));
        cum.push_back(static_cast<double>(r->cumulative_annotated));
      }
      AggregateRow row;
      row.strategy = strategy;
      row.episode = key.second;
      row.num_seeds = static_cast<int>(group.size());
      std::tie(row.accuracy_mean, row.accuracy_std) = mean_and_std(acc);
      std::tie(row.retention_mean, row.retention_std) = mean_and_std(ret);
      std::tie(row.annotated_mean, row.annotated_std) = mean_and_std(ann);
      std::tie(row.cumulative_mean, row.cumulative_std) = mean_and_std(cum);
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<AggregateRow> final_episode_summary(std::span<const MetricsRecord> records) {
  const auto rows = aggregate(records);
  std::map<std::string, int> last;
  for (const auto& r : rows) last[r.strategy] = std::max(last[r.strategy], r.episode);
  std::vector<AggregateRow> out;
  for (const auto& r : rows)
    if (r.episode == last[r.strategy]) out.push_back(r);
  return out;
}

}  // namespace acil
