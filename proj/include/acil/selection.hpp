#ifndef ACIL_SELECTION_HPP
#define ACIL_SELECTION_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "acil/classifier.hpp"
#include "acil/common.hpp"
#include "acil/datastream.hpp"

namespace acil {

enum class Strategy { Acil, Random, Coreset, Badge, Icarl, Gdumb, Rainbow, Finetuning };

/// Parse `acil | random | coreset | badge | icarl | gdumb | rainbow | finetuning`.
/// Throws ConfigError on an unknown id.
Strategy parse_strategy(std::string_view id);
std::string_view strategy_name(Strategy s) noexcept;
const std::vector<Strategy>& all_strategies();

/// Every sample of the episode (X^U_n included) is revealed and charged.
bool is_full_annotation(Strategy s) noexcept;
/// Exemplars are drawn from X^U_n only.
bool is_al_baseline(Strategy s) noexcept;

enum class PseudoLabelSource { Current, Previous };

struct SelectionOptions {
  PseudoLabelSource pseudo_label_source = PseudoLabelSource::Current;
  int rainbow_copies = 10;
  double rainbow_noise = 0.05;  // perturbation std as a fraction of per-feature std
  int kmeans_max_iterations = 100;
};

struct SelectionContext {
  const EpisodeData* episode = nullptr;
  const Classifier* model = nullptr;        // trained in this episode
  const ModelSnapshot* snapshot = nullptr;  // from the previous episode, may be null
  int budget = 0;
  std::uint64_t seed = 0;
  SelectionOptions options;

  void validate() const;
};

enum class ExemplarSource { FromUnlabeled, FromExemplar, FromLabeled };

struct ExemplarSet {
  std::vector<Sample> members;
  std::vector<ExemplarSource> sources;

  std::size_t size() const noexcept { return members.size(); }
  std::size_t count(ExemplarSource s) const;
  void add(Sample s, ExemplarSource src);
};

struct BudgetSplit {
  int k_unlabeled = 0;
  int k_exemplar = 0;
  std::map<ClassId, int> per_class_unlabeled;
  std::map<ClassId, int> per_class_exemplar;
};

/// k_unlabeled = round_half_up(k * |C_episode| / (|C_episode| + |C_exemplar|)),
/// k_exemplar = k - k_unlabeled.
BudgetSplit split_budget(int k, std::size_t num_episode_classes, std::size_t num_exemplar_classes);

/// Split `total` over `classes`: floor share each, remainder one apiece to the
/// classes with the most available samples (ties by ascending id). Classes whose
/// share exceeds availability are capped and the rest is re-split the same way
/// among the others; budget nobody can take is dropped.
std::map<ClassId, int> per_class_budgets(int total, std::span<const ClassId> classes,
                                         const std::map<ClassId, int>& available);

/// Argmax over `restrict_to` of the model's class probabilities, lowest class id
/// on ties. Classes the model does not know are skipped.
std::map<SampleId, ClassId> pseudo_label(const Classifier& model, std::span<const Sample> samples,
                                         std::span<const ClassId> restrict_to);

/// Weighted objective sum_x w(x) ||e(x) - c||^2 with c the w-weighted mean of the
/// columns of `embeddings`. All-zero weights fall back to the unweighted mean.
double weighted_variance(const Matrix& embeddings, const Vector& weights);

/// Pairwise variance (1 / 2|X|^2) sum_{i,j} ||e_i - e_j||^2.
double pairwise_variance(const Matrix& embeddings);

/// Weighted mean of the columns; unweighted mean if the weights sum to zero.
Vector weighted_mean(const Matrix& embeddings, const Vector& weights);

/// Weighted k-means++ seeding: first center drawn with probability proportional
/// to w, each next one proportional to w * D^2. Falls back to a uniform draw over
/// unchosen points when every w * D^2 is zero. Returns column indices.
std::vector<Eigen::Index> kmeanspp_seed(const Matrix& points, const Vector& weights,
                                        std::size_t count, Rng& rng);

struct KMeansResult {
  Matrix centers;                     // one column per cluster
  std::vector<int> assignment;        // cluster of each point
  std::vector<double> objective_trace;  // weighted objective after each Lloyd iteration
  int iterations = 0;
};

/// Weighted Lloyd iterations from k-means++ seeds, stopping when assignments are
/// stable or after `max_iterations`. An empty cluster is re-seeded at the point
/// with the largest weighted distance to its center.
KMeansResult weighted_kmeans(const Matrix& points, const Vector& weights, int clusters,
                             std::uint64_t seed, int max_iterations = 100);

/// One representative per weighted k-means cluster: the member nearest the
/// cluster's weighted mean (ties by lowest id). Pools no larger than `count`
/// are returned whole. If a cluster ends empty the shortfall is filled with the
/// highest-weight unselected points.
std::vector<SampleId> weighted_kmeans_select(std::span<const SampleId> ids, const Matrix& embeddings,
                                             const Vector& weights, int count, std::uint64_t seed,
                                             int max_iterations = 100);

/// Entropy of the model's prediction per sample, floored at 1e-12.
Vector uncertainty_weights(const Classifier& model, std::span<const Sample> samples);

/// ACIL exemplar selection: budget split by class counts, per-class budgets,
/// pseudo-labels on X^U_n, entropy-weighted k-means per class.
ExemplarSet acil_select(const SelectionContext& ctx);

/// Greedy k-center: repeatedly add the point farthest from the current centers.
/// With no initial centers the first pick is column 0.
std::vector<Eigen::Index> greedy_k_center(const Matrix& points, std::size_t count,
                                          const Matrix& initial_centers);

/// Max over points of the distance to the nearest of `centers`.
double covering_radius(const Matrix& points, std::span<const Eigen::Index> centers);

/// Herding order over the columns of `embeddings`: each step adds the point that
/// keeps the running mean of the chosen set closest to the overall mean.
std::vector<Eigen::Index> herding_order(const Matrix& embeddings, std::size_t count);

/// Output-layer gradient embeddings (p - onehot(argmax p)) (x) F(x), one column per sample.
Matrix gradient_embeddings(const Classifier& model, std::span<const Sample> samples);

/// Prediction variance of the max-class probability over `copies` noisy copies.
Vector perturbation_uncertainty(const Classifier& model, std::span<const Sample> samples,
                                const Vector& noise_std, int copies, Rng& rng);

/// Baseline strategies. Finetuning returns an empty set; Acil dispatches to acil_select.
ExemplarSet baseline_select(Strategy strategy, const SelectionContext& ctx);

/// Dispatch by strategy.
ExemplarSet select_exemplars(Strategy strategy, const SelectionContext& ctx);

}  // namespace acil

#endif  // ACIL_SELECTION_HPP
