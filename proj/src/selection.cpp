#include "acil/selection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "acil/random.hpp"

namespace acil {

namespace {

constexpr std::array<std::pair<Strategy, std::string_view>, 8> kStrategyNames{{
    {Strategy::Acil, "acil"},
    {Strategy::Random, "random"},
    {Strategy::Coreset, "coreset"},
    {Strategy::Badge, "badge"},
    {Strategy::Icarl, "icarl"},
    {Strategy::Gdumb, "gdumb"},
    {Strategy::Rainbow, "rainbow"},
    {Strategy::Finetuning, "finetuning"},
}};

constexpr double kMinWeight = 1e-12;

}  // namespace

Strategy parse_strategy(std::string_view id) {
  for (const auto& [s, name] : kStrategyNames)
    if (name == id) return s;
  throw ConfigError("unknown strategy '" + std::string(id) + "'", "strategy");
}

std::string_view strategy_name(Strategy s) noexcept {
  for (const auto& [k, name] : kStrategyNames)
    if (k == s) return name;
  return "unknown";
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> all = [] {
    std::vector<Strategy> v;
    for (const auto& [s, name] : kStrategyNames) v.push_back(s);
    return v;
  }();
  return all;
}

bool is_full_annotation(Strategy s) noexcept {
  return s == Strategy::Icarl || s == Strategy::Gdumb || s == Strategy::Rainbow ||
         s == Strategy::Finetuning;
}

bool is_al_baseline(Strategy s) noexcept {
  return s == Strategy::Random || s == Strategy::Coreset || s == Strategy::Badge;
}

void SelectionContext::validate() const {
  if (!episode || !model) throw ContractViolation("selection context needs an episode and a model");
  if (budget < 1) throw ContractViolation("selection budget must be >= 1");
}

std::size_t ExemplarSet::count(ExemplarSource s) const {
  return static_cast<std::size_t>(std::count(sources.begin(), sources.end(), s));
}

void ExemplarSet::add(Sample s, ExemplarSource src) {
  s.annotated = true;
  members.push_back(std::move(s));
  sources.push_back(src);
}

BudgetSplit split_budget(int k, std::size_t num_episode_classes, std::size_t num_exemplar_classes) {
  if (k < 1) throw ContractViolation("split_budget: k must be >= 1");
  if (num_episode_classes == 0) throw ContractViolation("split_budget: no episode classes");
  const auto a = static_cast<std::int64_t>(num_episode_classes);
  const auto total = a + static_cast<std::int64_t>(num_exemplar_classes);
  BudgetSplit split;
  // round half up of k * a / total in integer arithmetic
  split.k_unlabeled = static_cast<int>((2 * std::int64_t{k} * a + total) / (2 * total));
  split.k_exemplar = k - split.k_unlabeled;
  return split;
}

std::map<ClassId, int> per_class_budgets(int total, std::span<const ClassId> classes,
                                         const std::map<ClassId, int>& available) {
  std::map<ClassId, int> out;
  for (ClassId c : classes) out[c] = 0;
  if (total <= 0 || classes.empty()) return out;

  auto avail = [&](ClassId c) {
    const auto it = available.find(c);
    return it == available.end() ? 0 : std::max(0, it->second);
  };

  // Ranking for remainder units: most available first, then ascending id.
  std::vector<ClassId> ranked(classes.begin(), classes.end());
  std::sort(ranked.begin(), ranked.end(), [&](ClassId x, ClassId y) {
    return avail(x) != avail(y) ? avail(x) > avail(y) : x < y;
  });

  std::set<ClassId> capped;
  while (true) {
    std::vector<ClassId> open;
    int remaining = total;
    for (ClassId c : ranked) {
      if (capped.contains(c)) remaining -= avail(c);
      else open.push_back(c);
    }
    if (open.empty()) break;
    remaining = std::max(remaining, 0);
    const int share = remaining / static_cast<int>(open.size());
    const int extra = remaining % static_cast<int>(open.size());
    bool overflow = false;
    for (std::size_t r = 0; r < open.size(); ++r) {
      const ClassId c = open[r];
      out[c] = share + (static_cast<int>(r) < extra ? 1 : 0);
      if (out[c] > avail(c)) overflow = true;
    }
    if (!overflow) break;
    for (ClassId c : open)
      if (out[c] > avail(c)) {
        out[c] = avail(c);
        capped.insert(c);
      }
  }
  for (ClassId c : capped) out[c] = avail(c);
  return out;
}

std::map<SampleId, ClassId> pseudo_label(const Classifier& model, std::span<const Sample> samples,
                                         std::span<const ClassId> restrict_to) {
  std::vector<ClassId> allowed(restrict_to.begin(), restrict_to.end());
  std::sort(allowed.begin(), allowed.end());
  std::vector<std::pair<ClassId, int>> rows;
  for (ClassId c : allowed)
    if (const int r = model.index_of(c); r >= 0) rows.emplace_back(c, r);
  if (rows.empty() && !samples.empty())
    throw ContractViolation("pseudo_label: model knows none of the requested classes");

  std::map<SampleId, ClassId> labels;
  if (samples.empty()) return labels;
  const Matrix probs = model.predict_proba(feature_matrix(samples));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    ClassId best = rows.front().first;
    double best_p = probs(rows.front().second, col);
    for (std::size_t k = 1; k < rows.size(); ++k) {
      if (probs(rows[k].second, col) > best_p) {
        best_p = probs(rows[k].second, col);
        best = rows[k].first;
      }
    }
    labels[samples[i].id] = best;
  }
  return labels;
}

Vector weighted_mean(const Matrix& embeddings, const Vector& weights) {
  const double total = weights.sum();
  if (!(total > 0.0)) return embeddings.rowwise().mean();
  return embeddings * weights / total;
}

double weighted_variance(const Matrix& embeddings, const Vector& weights) {
  if (embeddings.cols() == 0) throw ContractViolation("weighted_variance: empty partition");
  const Vector center = weighted_mean(embeddings, weights);
  return ((embeddings.colwise() - center).colwise().squaredNorm().transpose().array() *
          weights.array())
      .sum();
}

double pairwise_variance(const Matrix& embeddings) {
  const Eigen::Index n = embeddings.cols();
  if (n == 0) throw ContractViolation("pairwise_variance: empty partition");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      sum += (embeddings.col(i) - embeddings.col(j)).squaredNorm();
  return sum / (2.0 * static_cast<double>(n) * static_cast<double>(n));
}

std::vector<Eigen::Index> kmeanspp_seed(const Matrix& points, const Vector& weights,
                                        std::size_t count, Rng& rng) {
  const Eigen::Index n = points.cols();
  std::vector<Eigen::Index> chosen;
  if (n == 0 || count == 0) return chosen;
  count = std::min(count, static_cast<std::size_t>(n));
  std::vector<bool> taken(static_cast<std::size_t>(n), false);

  auto uniform_unchosen = [&]() {
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!taken[static_cast<std::size_t>(i)]) free.push_back(i);
    return free[uniform_index(rng, free.size())];
  };
  auto take = [&](Eigen::Index i) {
    taken[static_cast<std::size_t>(i)] = true;
    chosen.push_back(i);
  };

  std::size_t first = sample_proportional(weights, rng);
  take(first < static_cast<std::size_t>(n) ? static_cast<Eigen::Index>(first) : uniform_unchosen());

  Vector d2 = Vector::Constant(n, std::numeric_limits<double>::infinity());
  Vector prob(n);
  while (chosen.size() < count) {
    const auto c = points.col(chosen.back());
    for (Eigen::Index i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (points.col(i) - c).squaredNorm());
    for (Eigen::Index i = 0; i < n; ++i)
      prob[i] = taken[static_cast<std::size_t>(i)] ? 0.0 : weights[i] * d2[i];
    const std::size_t next = sample_proportional(prob, rng);
    take(next < static_cast<std::size_t>(n) ? static_cast<Eigen::Index>(next) : uniform_unchosen());
  }
  return chosen;
}

namespace {

double objective(const Matrix& points, const Vector& weights, const Matrix& centers,
                 const std::vector<int>& assignment) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < points.cols(); ++i)
    sum += weights[i] *
           (points.col(i) - centers.col(assignment[static_cast<std::size_t>(i)])).squaredNorm();
  return sum;
}

}  // namespace

KMeansResult weighted_kmeans(const Matrix& points, const Vector& weights, int clusters,
                             std::uint64_t seed, int max_iterations) {
  if (clusters < 1) throw ContractViolation("weighted_kmeans: cluster count must be >= 1");
  const Eigen::Index n = points.cols();
  if (n == 0) throw ContractViolation("weighted_kmeans: empty pool");
  if (weights.size() != n) throw ContractViolation("weighted_kmeans: weight count mismatch");
  clusters = static_cast<int>(std::min<Eigen::Index>(clusters, n));

  Vector w = weights;
  if (!(w.sum() > 0.0)) w.setOnes();

  Rng rng(seed);
  const auto seeds = kmeanspp_seed(points, w, static_cast<std::size_t>(clusters), rng);
  KMeansResult res;
  res.centers.resize(points.rows(), clusters);
  for (int b = 0; b < clusters; ++b) res.centers.col(b) = points.col(seeds[static_cast<std::size_t>(b)]);
  res.assignment.assign(static_cast<std::size_t>(n), -1);

  std::vector<int> sizes(static_cast<std::size_t>(clusters));
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    // Assignment: keep the current cluster unless another is strictly closer.
    for (Eigen::Index i = 0; i < n; ++i) {
      int& a = res.assignment[static_cast<std::size_t>(i)];
      int best = a;
      double best_d = a >= 0 ? (points.col(i) - res.centers.col(a)).squaredNorm()
                             : std::numeric_limits<double>::infinity();
      for (int b = 0; b < clusters; ++b) {
        const double d = (points.col(i) - res.centers.col(b)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = b;
        }
      }
      if (best != a) {
        a = best;
        changed = true;
      }
    }

    // Re-seed empty clusters at the worst-served point of a multi-member cluster.
    std::fill(sizes.begin(), sizes.end(), 0);
    for (int a : res.assignment) ++sizes[static_cast<std::size_t>(a)];
    for (int b = 0; b < clusters; ++b) {
      if (sizes[static_cast<std::size_t>(b)] > 0) continue;
      Eigen::Index worst = -1;
      double worst_cost = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int a = res.assignment[static_cast<std::size_t>(i)];
        if (sizes[static_cast<std::size_t>(a)] < 2) continue;
        const double cost = w[i] * (points.col(i) - res.centers.col(a)).squaredNorm();
        if (cost > worst_cost) {
          worst_cost = cost;
          worst = i;
        }
      }
      if (worst < 0) continue;  // every point already coincides with its center
      --sizes[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(worst)])];
      res.assignment[static_cast<std::size_t>(worst)] = b;
      sizes[static_cast<std::size_t>(b)] = 1;
      res.centers.col(b) = points.col(worst);
      changed = true;
    }

    if (!changed) break;

    // Update: weighted means.
    Matrix sums = Matrix::Zero(points.rows(), clusters);
    Vector mass = Vector::Zero(clusters);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a = res.assignment[static_cast<std::size_t>(i)];
      sums.col(a) += w[i] * points.col(i);
      mass[a] += w[i];
    }
    for (int b = 0; b < clusters; ++b)
      if (mass[b] > 0.0) res.centers.col(b) = sums.col(b) / mass[b];

    res.objective_trace.push_back(objective(points, w, res.centers, res.assignment));
    res.iterations = it + 1;
  }
  return res;
}

std::vector<SampleId> weighted_kmeans_select(std::span<const SampleId> ids, const Matrix& embeddings,
                                             const Vector& weights, int count, std::uint64_t seed,
                                             int max_iterations) {
  if (count <= 0) throw ContractViolation("weighted_kmeans_select: count must be >= 1");
  const auto n = static_cast<Eigen::Index>(ids.size());
  if (embeddings.cols() != n || weights.size() != n)
    throw ContractViolation("weighted_kmeans_select: ids, embeddings and weights disagree");
  if (n <= count) return {ids.begin(), ids.end()};

  const KMeansResult km = weighted_kmeans(embeddings, weights, count, seed, max_iterations);
  Vector w = weights;
  if (!(w.sum() > 0.0)) w.setOnes();

  std::vector<SampleId> picked;
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (int b = 0; b < km.centers.cols(); ++b) {
    std::vector<Eigen::Index> members;
    for (Eigen::Index i = 0; i < n; ++i)
      if (km.assignment[static_cast<std::size_t>(i)] == b) members.push_back(i);
    if (members.empty()) continue;
    Matrix emb(embeddings.rows(), static_cast<Eigen::Index>(members.size()));
    Vector mw(static_cast<Eigen::Index>(members.size()));
    for (std::size_t k = 0; k < members.size(); ++k) {
      emb.col(static_cast<Eigen::Index>(k)) = embeddings.col(members[k]);
      mw[static_cast<Eigen::Index>(k)] = w[members[k]];
    }
    const Vector center = weighted_mean(emb, mw);
    Eigen::Index best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < members.size(); ++k) {
      const double d = (emb.col(static_cast<Eigen::Index>(k)) - center).squaredNorm();
      const Eigen::Index i = members[k];
      if (d < best_d || (d == best_d && ids[static_cast<std::size_t>(i)] < ids[static_cast<std::size_t>(best)])) {
        best_d = d;
        best = i;
      }
    }
    used[static_cast<std::size_t>(best)] = true;
    picked.push_back(ids[static_cast<std::size_t>(best)]);
  }

  if (static_cast<int>(picked.size()) < count) {
    std::vector<Eigen::Index> rest;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!used[static_cast<std::size_t>(i)]) rest.push_back(i);
    std::sort(rest.begin(), rest.end(), [&](Eigen::Index x, Eigen::Index y) {
      if (w[x] != w[y]) return w[x] > w[y];
      return ids[static_cast<std::size_t>(x)] < ids[static_cast<std::size_t>(y)];
    });
    for (std::size_t k = 0; k < rest.size() && static_cast<int>(picked.size()) < count; ++k)
      picked.push_back(ids[static_cast<std::size_t>(rest[k])]);
  }
  return picked;
}

Vector uncertainty_weights(const Classifier& model, std::span<const Sample> samples) {
  Vector w(static_cast<Eigen::Index>(samples.size()));
  if (samples.empty()) return w;
  const Matrix probs = model.predict_proba(feature_matrix(samples));
  for (Eigen::Index i = 0; i < probs.cols(); ++i)
    w[i] = std::max(entropy_unchecked(probs.col(i)), kMinWeight);
  return w;
}

namespace {

std::vector<ClassId> sorted_classes(std::span<const Sample> samples) {
  std::set<ClassId> s;
  for (const auto& x : samples) s.insert(x.true_label);
  return {s.begin(), s.end()};
}

/// Run weighted k-means selection on `group` with the context's model.
std::vector<SampleId> select_group(const SelectionContext& ctx, const std::vector<Sample>& group,
                                   int count, std::uint64_t seed) {
  if (count <= 0 || group.empty()) return {};
  const Matrix emb = ctx.model->embed(feature_matrix(group));
  const Vector w = uncertainty_weights(*ctx.model, group);
  const auto ids = ids_of(group);
  return weighted_kmeans_select(ids, emb, w, count, seed, ctx.options.kmeans_max_iterations);
}

}  // namespace

ExemplarSet acil_select(const SelectionContext& ctx) {
  ctx.validate();
  const EpisodeData& ep = *ctx.episode;
  const std::vector<ClassId> episode_classes = ep.classes();
  const std::vector<ClassId> exemplar_classes = sorted_classes(ep.incoming_exemplars);
  if (episode_classes.empty()) throw ContractViolation("acil_select: episode has no labeled classes");

  BudgetSplit split = split_budget(ctx.budget, episode_classes.size(), exemplar_classes.size());

  // Budget one side cannot place moves to the other side.
  const int pool_unl = static_cast<int>(ep.unlabeled.size());
  const int pool_ex = static_cast<int>(ep.incoming_exemplars.size());
  const int short_unl = std::max(0, split.k_unlabeled - pool_unl);
  const int short_ex = std::max(0, split.k_exemplar - pool_ex);
  split.k_unlabeled = std::min(pool_unl, split.k_unlabeled + short_ex);
  split.k_exemplar = std::min(pool_ex, split.k_exemplar + short_unl);

  const Classifier* labeler = ctx.model;
  if (ctx.options.pseudo_label_source == PseudoLabelSource::Previous && ctx.snapshot &&
      !ctx.snapshot->empty())
    labeler = &ctx.snapshot->model();
  const auto pseudo = pseudo_label(*labeler, ep.unlabeled, episode_classes);

  std::map<ClassId, std::vector<Sample>> unl_groups, ex_groups;
  for (const auto& s : ep.unlabeled) unl_groups[pseudo.at(s.id)].push_back(s);
  for (const auto& s : ep.incoming_exemplars) ex_groups[s.true_label].push_back(s);

  std::map<ClassId, int> unl_avail, ex_avail;
  for (const auto& [c, g] : unl_groups) unl_avail[c] = static_cast<int>(g.size());
  for (const auto& [c, g] : ex_groups) ex_avail[c] = static_cast<int>(g.size());
  split.per_class_unlabeled = per_class_budgets(split.k_unlabeled, episode_classes, unl_avail);
  split.per_class_exemplar = per_class_budgets(split.k_exemplar, exemplar_classes, ex_avail);

  ExemplarSet out;
  auto emit = [&](const std::vector<Sample>& group, const std::vector<SampleId>& ids,
                  ExemplarSource src) {
    const std::set<SampleId> wanted(ids.begin(), ids.end());
    for (const auto& s : group)
      if (wanted.contains(s.id)) out.add(s, src);
  };
  for (const auto& [c, budget] : split.per_class_unlabeled) {
    const auto& group = unl_groups[c];
    emit(group, select_group(ctx, group, budget, derive_seed(ctx.seed, 0, "acil-unlabeled", c)),
         ExemplarSource::FromUnlabeled);
  }
  for (const auto& [c, budget] : split.per_class_exemplar) {
    const auto& group = ex_groups[c];
    emit(group, select_group(ctx, group, budget, derive_seed(ctx.seed, 0, "acil-exemplar", c)),
         ExemplarSource::FromExemplar);
  }
  return out;
}

std::vector<Eigen::Index> greedy_k_center(const Matrix& points, std::size_t count,
                                          const Matrix& initial_centers) {
  const Eigen::Index n = points.cols();
  std::vector<Eigen::Index> chosen;
  if (n == 0 || count == 0) return chosen;
  count = std::min(count, static_cast<std::size_t>(n));

  Vector mind = Vector::Constant(n, std::numeric_limits<double>::infinity());
  for (Eigen::Index c = 0; c < initial_centers.cols(); ++c)
    for (Eigen::Index i = 0; i < n; ++i)
      mind[i] = std::min(mind[i], (points.col(i) - initial_centers.col(c)).norm());
  std::vector<bool> taken(static_cast<std::size_t>(n), false);

  auto take = [&](Eigen::Index k) {
    taken[static_cast<std::size_t>(k)] = true;
    chosen.push_back(k);
    for (Eigen::Index i = 0; i < n; ++i)
      mind[i] = std::min(mind[i], (points.col(i) - points.col(k)).norm());
  };

  if (initial_centers.cols() == 0) take(0);
  while (chosen.size() < count) {
    Eigen::Index best = -1;
    double best_d = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      if (mind[i] > best_d) {
        best_d = mind[i];
        best = i;
      }
    }
    take(best);
  }
  return chosen;
}

double covering_radius(const Matrix& points, std::span<const Eigen::Index> centers) {
  double radius = 0.0;
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    double d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c : centers) d = std::min(d, (points.col(i) - points.col(c)).norm());
    radius = std::max(radius, d);
  }
  return radius;
}

std::vector<Eigen::Index> herding_order(const Matrix& embeddings, std::size_t count) {
  const Eigen::Index n = embeddings.cols();
  std::vector<Eigen::Index> order;
  if (n == 0) return order;
  count = std::min(count, static_cast<std::size_t>(n));
  const Vector mu = embeddings.rowwise().mean();
  Vector running = Vector::Zero(embeddings.rows());
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  while (order.size() < count) {
    const double t = static_cast<double>(order.size() + 1);
    Eigen::Index best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      const double d = (mu - (running + embeddings.col(i)) / t).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    taken[static_cast<std::size_t>(best)] = true;
    running += embeddings.col(best);
    order.push_back(best);
  }
  return order;
}

Matrix gradient_embeddings(const Classifier& model, std::span<const Sample> samples) {
  if (samples.empty()) return {};
  const auto act = model.forward(feature_matrix(samples));
  const Matrix probs = softmax(act.logits);
  const Eigen::Index c = probs.rows();
  const Eigen::Index h = act.embedding.rows();
  Matrix g(c * h, probs.cols());
  for (Eigen::Index i = 0; i < probs.cols(); ++i) {
    Eigen::Index top = 0;
    probs.col(i).maxCoeff(&top);
    Vector residual = probs.col(i);
    residual[top] -= 1.0;
    // Kronecker product, class-major.
    for (Eigen::Index k = 0; k < c; ++k) g.col(i).segment(k * h, h) = residual[k] * act.embedding.col(i);
  }
  return g;
}

Vector perturbation_uncertainty(const Classifier& model, std::span<const Sample> samples,
                                const Vector& noise_std, int copies, Rng& rng) {
  const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
  Vector result = Vector::Zero(n);
  if (n == 0 || copies < 1) return result;
  const Matrix x = feature_matrix(samples);
  Matrix top(copies, n);
  for (int m = 0; m < copies; ++m) {
    Matrix noisy = x;
    for (Eigen::Index j = 0; j < noisy.cols(); ++j)
      for (Eigen::Index i = 0; i < noisy.rows(); ++i) noisy(i, j) += noise_std[i] * standard_normal(rng);
    top.row(m) = model.predict_proba(noisy).colwise().maxCoeff();
  }
  const Eigen::RowVectorXd mean = top.colwise().mean();
  for (Eigen::Index j = 0; j < n; ++j)
    result[j] = (top.col(j).array() - mean[j]).square().sum() / copies;
  return result;
}

namespace {

struct Candidate {
  const Sample* sample;
  ExemplarSource source;
};

/// X^L_n, X^U_n and E_{n-1} together; labels are revealed for these strategies.
std::vector<Candidate> full_pool(const EpisodeData& ep) {
  std::vector<Candidate> pool;
  for (const auto& s : ep.labeled) pool.push_back({&s, ExemplarSource::FromLabeled});
  for (const auto& s : ep.unlabeled) pool.push_back({&s, ExemplarSource::FromUnlabeled});
  for (const auto& s : ep.incoming_exemplars) pool.push_back({&s, ExemplarSource::FromExemplar});
  return pool;
}

std::map<ClassId, std::vector<Candidate>> group_by_label(const std::vector<Candidate>& pool) {
  std::map<ClassId, std::vector<Candidate>> groups;
  for (const auto& c : pool) groups[c.sample->true_label].push_back(c);
  return groups;
}

std::map<ClassId, int> balanced_budgets(const std::map<ClassId, std::vector<Candidate>>& groups,
                                        int total) {
  std::vector<ClassId> classes;
  std::map<ClassId, int> avail;
  for (const auto& [c, g] : groups) {
    classes.push_back(c);
    avail[c] = static_cast<int>(g.size());
  }
  return per_class_budgets(total, classes, avail);
}

std::vector<Sample> samples_of(const std::vector<Candidate>& group) {
  std::vector<Sample> out;
  out.reserve(group.size());
  for (const auto& c : group) out.push_back(*c.sample);
  return out;
}

ExemplarSet select_random(const SelectionContext& ctx) {
  const auto& pool = ctx.episode->unlabeled;
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(ctx.seed, 0, "random"));
  const std::size_t take = std::min(idx.size(), static_cast<std::size_t>(ctx.budget));
  for (std::size_t i = 0; i < take; ++i)
    std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
  ExemplarSet out;
  for (std::size_t i = 0; i < take; ++i) out.add(pool[idx[i]], ExemplarSource::FromUnlabeled);
  return out;
}

ExemplarSet select_coreset(const SelectionContext& ctx) {
  const auto& pool = ctx.episode->unlabeled;
  ExemplarSet out;
  if (pool.empty()) return out;
  const Matrix points = ctx.model->embed(feature_matrix(pool));
  const Matrix covered = ctx.episode->labeled.empty()
                             ? Matrix(points.rows(), 0)
                             : ctx.model->embed(feature_matrix(ctx.episode->labeled));
  for (Eigen::Index i : greedy_k_center(points, static_cast<std::size_t>(ctx.budget), covered))
    out.add(pool[static_cast<std::size_t>(i)], ExemplarSource::FromUnlabeled);
  return out;
}

ExemplarSet select_badge(const SelectionContext& ctx) {
  const auto& pool = ctx.episode->unlabeled;
  ExemplarSet out;
  if (pool.empty()) return out;
  const Matrix g = gradient_embeddings(*ctx.model, pool);
  Rng rng(derive_seed(ctx.seed, 0, "badge"));
  const Vector ones = Vector::Ones(g.cols());
  for (Eigen::Index i : kmeanspp_seed(g, ones, static_cast<std::size_t>(ctx.budget), rng))
    out.add(pool[static_cast<std::size_t>(i)], ExemplarSource::FromUnlabeled);
  return out;
}

ExemplarSet select_icarl(const SelectionContext& ctx) {
  const auto groups = group_by_label(full_pool(*ctx.episode));
  ExemplarSet out;
  for (const auto& [c, budget] : balanced_budgets(groups, ctx.budget)) {
    const auto& group = groups.at(c);
    if (budget <= 0) continue;
    const Matrix emb = ctx.model->embed(feature_matrix(samples_of(group)));
    for (Eigen::Index i : herding_order(emb, static_cast<std::size_t>(budget)))
      out.add(*group[static_cast<std::size_t>(i)].sample, group[static_cast<std::size_t>(i)].source);
  }
  return out;
}

ExemplarSet select_gdumb(const SelectionContext& ctx) {
  auto groups = group_by_label(full_pool(*ctx.episode));
  Rng rng(derive_seed(ctx.seed, 0, "gdumb"));
  for (auto& [c, g] : groups) shuffle(g, rng);
  std::map<ClassId, std::size_t> taken;
  ExemplarSet out;
  while (static_cast<int>(out.size()) < ctx.budget) {
    const std::vector<Candidate>* best_group = nullptr;
    ClassId best = 0;
    for (const auto& [c, g] : groups) {
      if (taken[c] >= g.size()) continue;
      if (!best_group || taken[c] < taken[best]) {
        best_group = &g;
        best = c;
      }
    }
    if (!best_group) break;
    const Candidate& pick = (*best_group)[taken[best]++];
    out.add(*pick.sample, pick.source);
  }
  return out;
}

ExemplarSet select_rainbow(const SelectionContext& ctx) {
  const auto pool = full_pool(*ctx.episode);
  ExemplarSet out;
  if (pool.empty()) return out;
  const std::vector<Sample> all = samples_of(pool);
  const Matrix x = feature_matrix(all);
  const Vector mean = x.rowwise().mean();
  const Vector std_dev =
      ((x.colwise() - mean).array().square().rowwise().sum() / static_cast<double>(x.cols()))
          .sqrt()
          .matrix();
  Rng rng(derive_seed(ctx.seed, 0, "rainbow"));
  const Vector u = perturbation_uncertainty(*ctx.model, all, ctx.options.rainbow_noise * std_dev,
                                            ctx.options.rainbow_copies, rng);
  std::map<const Sample*, double> uncertainty;
  for (std::size_t i = 0; i < pool.size(); ++i) uncertainty[pool[i].sample] = u[static_cast<Eigen::Index>(i)];

  auto groups = group_by_label(pool);
  for (const auto& [c, budget] : balanced_budgets(groups, ctx.budget)) {
    auto group = groups.at(c);
    if (budget <= 0) continue;
    std::sort(group.begin(), group.end(), [&](const Candidate& a, const Candidate& b) {
      const double ua = uncertainty[a.sample], ub = uncertainty[b.sample];
      return ua != ub ? ua < ub : a.sample->id < b.sample->id;
    });
    const std::size_t n = group.size();
    const auto strata = static_cast<std::size_t>(budget);
    for (std::size_t s = 0; s < strata; ++s) {
      const std::size_t lo = s * n / strata;
      const std::size_t hi = (s + 1) * n / strata;
      const Candidate& pick = group[lo + uniform_index(rng, hi - lo)];
      out.add(*pick.sample, pick.source);
    }
  }
  return out;
}

}  // namespace

ExemplarSet baseline_select(Strategy strategy, const SelectionContext& ctx) {
  ctx.validate();
  switch (strategy) {
    case Strategy::Random: return select_random(ctx);
    case Strategy::Coreset: return select_coreset(ctx);
    case Strategy::Badge: return select_badge(ctx);
    case Strategy::Icarl: return select_icarl(ctx);
    case Strategy::Gdumb: return select_gdumb(ctx);
    case Strategy::Rainbow: return select_rainbow(ctx);
    case Strategy::Finetuning: return {};
    case Strategy::Acil: return acil_select(ctx);
  }
  throw ConfigError("unknown strategy", "strategy");
}

ExemplarSet select_exemplars(Strategy strategy, const SelectionContext& ctx) {
  return strategy == Strategy::Acil ? acil_select(ctx) : baseline_select(strategy, ctx);
}

}  // namespace acil
