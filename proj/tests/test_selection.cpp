#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "acil/selection.hpp"
#include "test_helpers.hpp"

using namespace acil;

TEST_CASE("split_budget examples") {
  auto s = split_budget(300, 2, 4);
  CHECK(s.k_unlabeled == 100);
  CHECK(s.k_exemplar == 200);
  s = split_budget(100, 2, 0);
  CHECK(s.k_unlabeled == 100);
  CHECK(s.k_exemplar == 0);
  s = split_budget(100, 2, 2);
  CHECK(s.k_unlabeled == 50);
  CHECK(s.k_exemplar == 50);
  // Half-way values round up on the unlabeled side.
  s = split_budget(5, 1, 1);
  CHECK(s.k_unlabeled == 3);
  CHECK(s.k_exemplar == 2);
}

TEST_CASE("property: split_budget sums to k and is monotone in exemplar classes") {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 1 + static_cast<int>(gen() % 1000);
    const std::size_t ep = 1 + gen() % 10;
    int prev = k + 1;
    for (std::size_t ex = 0; ex < 40; ++ex) {
      const auto s = split_budget(k, ep, ex);
      CHECK(s.k_unlabeled + s.k_exemplar == k);
      CHECK(s.k_unlabeled >= 0);
      CHECK(s.k_exemplar >= 0);
      CHECK(s.k_unlabeled <= prev);
      prev = s.k_unlabeled;
    }
  }
}

namespace {

// Hand one unit at a time to the open class with the smallest allocation; ties
// go to the larger availability, then the lower id.
std::map<ClassId, int> water_fill(int total, const std::vector<ClassId>& classes,
                                  const std::map<ClassId, int>& avail) {
  std::map<ClassId, int> out;
  for (ClassId c : classes) out[c] = 0;
  for (int unit = 0; unit < total; ++unit) {
    std::optional<ClassId> best;
    for (ClassId c : classes) {
      if (out[c] >= avail.at(c)) continue;
      if (!best || out[c] < out[*best] ||
          (out[c] == out[*best] &&
           (avail.at(c) > avail.at(*best) || (avail.at(c) == avail.at(*best) && c < *best))))
        best = c;
    }
    if (!best) break;
    ++out[*best];
  }
  return out;
}

}  // namespace

TEST_CASE("per_class_budgets examples") {
  const std::vector<ClassId> two{0, 1}, three{0, 1, 2};
  CHECK(per_class_budgets(10, two, {{0, 100}, {1, 100}}) == std::map<ClassId, int>{{0, 5}, {1, 5}});

  const auto b = per_class_budgets(10, three, {{0, 100}, {1, 100}, {2, 100}});
  CHECK(b == std::map<ClassId, int>{{0, 4}, {1, 3}, {2, 3}});
  // Brute force: every balanced assignment of 10 over 3 classes is a permutation of {4,3,3}.
  int balanced = 0;
  for (int x = 0; x <= 10; ++x)
    for (int y = 0; x + y <= 10; ++y) {
      const int z = 10 - x - y;
      if (std::max({x, y, z}) - std::min({x, y, z}) <= 1) {
        ++balanced;
        CHECK(std::max({x, y, z}) == 4);
      }
    }
  CHECK(balanced == 3);

  const std::map<ClassId, int> avail{{0, 3}, {1, 100}};
  CHECK(per_class_budgets(10, two, avail) == std::map<ClassId, int>{{0, 3}, {1, 7}});
  CHECK(per_class_budgets(10, two, avail) == water_fill(10, two, avail));
  CHECK(per_class_budgets(0, two, avail) == std::map<ClassId, int>{{0, 0}, {1, 0}});
  // More budget than samples: the excess is dropped.
  CHECK(per_class_budgets(50, two, {{0, 3}, {1, 4}}) == std::map<ClassId, int>{{0, 3}, {1, 4}});
}

TEST_CASE("property: per_class_budgets equals greedy water-filling") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(gen() % 6);
    std::vector<ClassId> classes;
    std::map<ClassId, int> avail;
    for (int c = 0; c < n; ++c) {
      classes.push_back(c * 3 + 1);
      avail[c * 3 + 1] = static_cast<int>(gen() % 15);
    }
    const int total = static_cast<int>(gen() % 60);
    const auto got = per_class_budgets(total, classes, avail);
    CAPTURE(trial);
    CHECK(got == water_fill(total, classes, avail));
    int sum = 0, cap = 0;
    for (auto [c, v] : got) {
      sum += v;
      cap += avail[c];
    }
    CHECK(sum == std::min(total, cap));
  }
}

namespace {

struct Fixture {
  std::vector<EpisodeData> stream;
  TrainOutcome ep0;

  Fixture() {
    StreamConfig sc;
    sc.num_episodes = 2;
    sc.classes_per_episode = 2;
    sc.labeled_per_class = 10;
    sc.unlabeled_per_class = 50;
    sc.test_per_class = 20;
    sc.feature_dim = 4;
    sc.seed = 3;
    stream = generate_synthetic_stream(sc);
    TrainConfig tc;
    tc.epochs = 40;
    tc.seed = 4;
    ep0 = train_episode(nullptr, stream[0], nullptr, tc);
  }

  SelectionContext context(int episode, const Classifier& model, int budget) const {
    SelectionContext ctx;
    ctx.episode = &stream[static_cast<std::size_t>(episode)];
    ctx.model = &model;
    ctx.snapshot = episode > 0 ? &ep0.snapshot : nullptr;
    ctx.budget = budget;
    ctx.seed = 99;
    return ctx;
  }
};

std::set<SampleId> id_set(const ExemplarSet& e) {
  std::set<SampleId> out;
  for (const auto& s : e.members) out.insert(s.id);
  return out;
}

}  // namespace

TEST_CASE("pseudo_label restriction and tie-break") {
  Fixture f;
  const auto& ep = f.stream[0];
  const std::vector<ClassId> classes = ep.classes();

  const auto labels = pseudo_label(f.ep0.model, ep.unlabeled, classes);
  CHECK(labels.size() == ep.unlabeled.size());
  std::size_t agree = 0;
  for (const auto& s : ep.unlabeled) {
    const ClassId c = labels.at(s.id);
    CHECK(std::find(classes.begin(), classes.end(), c) != classes.end());
    agree += c == s.true_label ? 1 : 0;
  }
  CHECK(static_cast<double>(agree) / ep.unlabeled.size() >= 0.9);

  // Only class 1 allowed: nothing else may come back.
  const std::vector<ClassId> only{classes[1]};
  for (const auto& [id, c] : pseudo_label(f.ep0.model, ep.unlabeled, only)) CHECK(c == classes[1]);

  Classifier zero(4, 0, {0, 1, 2, 3});
  const std::vector<ClassId> later{3, 2};
  for (const auto& [id, c] : pseudo_label(zero, ep.unlabeled, later)) CHECK(c == 2);
}

TEST_CASE("pseudo-label agreement on separable data over 5 seeds") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    StreamConfig sc;
    sc.num_episodes = 1;
    sc.labeled_per_class = 20;
    sc.unlabeled_per_class = 100;
    sc.test_per_class = 10;
    sc.seed = seed;
    const auto stream = generate_synthetic_stream(sc);
    TrainConfig tc;
    tc.seed = seed;
    const auto out = train_episode(nullptr, stream[0], nullptr, tc);
    const auto labels = pseudo_label(out.model, stream[0].unlabeled, stream[0].classes());
    std::size_t agree = 0;
    for (const auto& s : stream[0].unlabeled) agree += labels.at(s.id) == s.true_label ? 1 : 0;
    CHECK(static_cast<double>(agree) / stream[0].unlabeled.size() >= 0.9);
  }
}

TEST_CASE("weighted_variance examples") {
  Matrix one(1, 1);
  one << 3.0;
  CHECK(weighted_variance(one, Vector::Constant(1, 0.7)) < 1e-24);
  CHECK(pairwise_variance(one) == 0.0);

  Matrix two(1, 2);
  two << 0.0, 2.0;
  for (double w : {0.5, 1.0, 3.0}) CHECK(weighted_variance(two, Vector::Constant(2, w)) == doctest::Approx(2.0 * w));
  CHECK(pairwise_variance(two) == doctest::Approx(1.0));
  // Zero weights fall back to the unweighted mean (objective itself is zero).
  CHECK(weighted_variance(two, Vector::Zero(2)) == 0.0);
  Vector wm = weighted_mean(two, Vector::Zero(2));
  CHECK(wm[0] == doctest::Approx(1.0));

  std::mt19937_64 gen(5);
  const Matrix x = test::random_matrix(3, 9, gen);
  Matrix doubled(3, 18);
  doubled << x, x;
  CHECK(pairwise_variance(doubled) == doctest::Approx(pairwise_variance(x)).epsilon(1e-12));
}

TEST_CASE("weighted k-means objective never increases") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(gen() % 60);
    const Matrix pts = test::random_matrix(1 + trial % 4, n, gen);
    Vector w(n);
    std::uniform_real_distribution<double> u(0.01, 2.0);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = u(gen);
    const int clusters = 1 + static_cast<int>(gen() % 6);
    const auto res = weighted_kmeans(pts, w, clusters, static_cast<std::uint64_t>(trial));
    CHECK(res.centers.cols() == clusters);
    CHECK(res.assignment.size() == static_cast<std::size_t>(n));
    for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
      CHECK(res.objective_trace[i] <= res.objective_trace[i - 1] * (1.0 + 1e-12));
  }
}

TEST_CASE("weighted_kmeans_select oracles") {
  std::mt19937_64 gen(13);
  SUBCASE("B = 1 picks the point nearest the weighted mean") {
    for (int trial = 0; trial < 30; ++trial) {
      const Eigen::Index n = 2 + static_cast<Eigen::Index>(gen() % 49);
      const Matrix pts = test::random_matrix(3, n, gen);
      Vector w(n);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (Eigen::Index i = 0; i < n; ++i) w[i] = u(gen);
      std::vector<SampleId> ids(static_cast<std::size_t>(n));
      std::iota(ids.begin(), ids.end(), 100);
      const Vector c = (pts * w) / w.sum();
      Eigen::Index best = 0;
      for (Eigen::Index i = 1; i < n; ++i)
        if ((pts.col(i) - c).squaredNorm() < (pts.col(best) - c).squaredNorm()) best = i;
      const auto got = weighted_kmeans_select(ids, pts, w, 1, static_cast<std::uint64_t>(trial));
      REQUIRE(got.size() == 1);
      CHECK(got[0] == 100 + best);
    }
  }
  SUBCASE("pool no larger than B is returned whole") {
    const Matrix pts = test::random_matrix(2, 4, gen);
    const std::vector<SampleId> ids{7, 3, 9, 1};
    auto got = weighted_kmeans_select(ids, pts, Vector::Ones(4), 4, 1);
    std::sort(got.begin(), got.end());
    CHECK(got == std::vector<SampleId>{1, 3, 7, 9});
    CHECK(weighted_kmeans_select(ids, pts, Vector::Ones(4), 10, 1).size() == 4);
    CHECK_THROWS_AS(weighted_kmeans_select(ids, pts, Vector::Ones(4), 0, 1), ContractViolation);
  }
  SUBCASE("two separated blobs give one pick per blob") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Matrix pts = test::random_matrix(2, 40, gen, 0.5);
      pts.rightCols(20).row(0).array() += 20.0;
      std::vector<SampleId> ids(40);
      std::iota(ids.begin(), ids.end(), 0);
      const auto got = weighted_kmeans_select(ids, pts, Vector::Ones(40), 2, seed);
      REQUIRE(got.size() == 2);
      CHECK((got[0] < 20) != (got[1] < 20));
    }
  }
  SUBCASE("unique, deterministic, and invariant to weight scale") {
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix pts = test::random_matrix(3, 60, gen);
      Vector w(60);
      std::uniform_real_distribution<double> u(0.05, 1.0);
      for (Eigen::Index i = 0; i < 60; ++i) w[i] = u(gen);
      std::vector<SampleId> ids(60);
      std::iota(ids.begin(), ids.end(), 0);
      const auto a = weighted_kmeans_select(ids, pts, w, 7, 5);
      const auto b = weighted_kmeans_select(ids, pts, w, 7, 5);
      const auto scaled = weighted_kmeans_select(ids, pts, w * 4.0, 7, 5);
      CHECK(a == b);
      CHECK(a == scaled);
      CHECK(std::set<SampleId>(a.begin(), a.end()).size() == 7);
    }
  }
}

TEST_CASE("uncertainty weights are floored entropies") {
  Classifier zero(2, 0, {0, 1});
  const std::vector<Sample> s{test::make_sample(0, {1.0, 1.0}), test::make_sample(1, {2.0, 0.0})};
  const Vector w = uncertainty_weights(zero, s);
  CHECK(w[0] == doctest::Approx(std::log(2.0)));
  Classifier sure(1, 0, {0, 1});
  sure.params().b2 << 1000.0, -1000.0;
  CHECK(uncertainty_weights(sure, std::vector<Sample>{test::make_sample(0, {1.0})})[0] == 1e-12);
}

TEST_CASE("acil_select") {
  Fixture f;
  const auto e0 = acil_select(f.context(0, f.ep0.model, 20));
  CHECK(e0.size() == 20);
  CHECK(e0.count(ExemplarSource::FromUnlabeled) == 20);

  std::set<SampleId> labeled;
  for (const auto& s : f.stream[0].labeled) labeled.insert(s.id);
  for (const auto& s : e0.members) {
    CHECK_FALSE(labeled.contains(s.id));
    CHECK(s.annotated);
  }
  CHECK(id_set(e0).size() == e0.size());
  // Balanced per-class budgets over the true classes of the picks' pseudo-labels.
  CHECK(acil_select(f.context(0, f.ep0.model, 20)).members.size() == 20);
  CHECK(id_set(acil_select(f.context(0, f.ep0.model, 20))) == id_set(e0));

  EpisodeData ep1 = f.stream[1];
  ep1.incoming_exemplars = e0.members;
  auto stream1 = f.stream;
  stream1[1] = ep1;
  TrainConfig tc;
  tc.epochs = 30;
  const auto m1 = train_episode(nullptr, ep1, &f.ep0.snapshot, tc);
  SelectionContext ctx;
  ctx.episode = &ep1;
  ctx.model = &m1.model;
  ctx.snapshot = &f.ep0.snapshot;
  ctx.budget = 20;
  ctx.seed = 5;
  const auto e1 = acil_select(ctx);
  CHECK(e1.size() == 20);
  CHECK(e1.count(ExemplarSource::FromUnlabeled) == 10);
  CHECK(e1.count(ExemplarSource::FromExemplar) == 10);
  CHECK(e1.count(ExemplarSource::FromLabeled) == 0);
  for (std::size_t i = 0; i < e1.size(); ++i) {
    const auto& m = e1.members[i];
    const bool new_class = m.true_label >= 2;
    CHECK(new_class == (e1.sources[i] == ExemplarSource::FromUnlabeled));
  }

  ctx.budget = 1000;
  const auto all = acil_select(ctx);
  CHECK(all.size() == ep1.unlabeled.size() + ep1.incoming_exemplars.size());
  CHECK(id_set(all).size() == all.size());

  ctx.budget = 0;
  CHECK_THROWS_AS(acil_select(ctx), ContractViolation);
}

TEST_CASE("strategy ids") {
  for (Strategy s : all_strategies()) CHECK(parse_strategy(strategy_name(s)) == s);
  CHECK(all_strategies().size() == 8);
  CHECK_THROWS_AS(parse_strategy("greedy"), ConfigError);
  CHECK(is_full_annotation(Strategy::Icarl));
  CHECK(is_full_annotation(Strategy::Finetuning));
  CHECK_FALSE(is_full_annotation(Strategy::Acil));
  CHECK(is_al_baseline(Strategy::Badge));
  CHECK_FALSE(is_al_baseline(Strategy::Gdumb));
}

TEST_CASE("baselines: size, uniqueness, pool") {
  Fixture f;
  std::set<SampleId> unlabeled;
  for (const auto& s : f.stream[0].unlabeled) unlabeled.insert(s.id);
  const std::size_t full_pool = f.stream[0].labeled.size() + f.stream[0].unlabeled.size();
  for (Strategy s : all_strategies()) {
    if (s == Strategy::Finetuning) {
      CHECK(select_exemplars(s, f.context(0, f.ep0.model, 30)).size() == 0);
      continue;
    }
    CAPTURE(strategy_name(s));
    for (int k : {1, 30, 5000}) {
      const auto e = select_exemplars(s, f.context(0, f.ep0.model, k));
      const std::size_t pool = is_full_annotation(s) ? full_pool : unlabeled.size();
      CHECK(e.size() == std::min<std::size_t>(static_cast<std::size_t>(k), pool));
      CHECK(id_set(e).size() == e.size());
      for (const auto& m : e.members) {
        CHECK(m.annotated);
        if (is_al_baseline(s)) CHECK(unlabeled.contains(m.id));
      }
    }
    const auto a = select_exemplars(s, f.context(0, f.ep0.model, 30));
    const auto b = select_exemplars(s, f.context(0, f.ep0.model, 30));
    CHECK(id_set(a) == id_set(b));
  }
}

TEST_CASE("gdumb balances classes") {
  Fixture f;
  const auto e = baseline_select(Strategy::Gdumb, f.context(0, f.ep0.model, 10));
  std::map<ClassId, int> per;
  for (const auto& m : e.members) ++per[m.true_label];
  CHECK(per == std::map<ClassId, int>{{0, 5}, {1, 5}});
}

TEST_CASE("herding starts at the sample nearest the mean and covers the class") {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix emb = test::random_matrix(4, 25, gen);
    const Vector mu = emb.rowwise().mean();
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < 25; ++i)
      if ((emb.col(i) - mu).norm() < (emb.col(best) - mu).norm()) best = i;
    const auto order = herding_order(emb, 25);
    REQUIRE(order.size() == 25);
    CHECK(order[0] == best);
    CHECK(std::set<Eigen::Index>(order.begin(), order.end()).size() == 25);
  }
}

namespace {

double optimal_k_center_radius(const Matrix& pts, std::size_t k) {
  const Eigen::Index n = pts.cols();
  double best = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Index> pick(k);
  // Enumerate k-subsets in lexicographic order.
  std::vector<bool> mask(static_cast<std::size_t>(n), false);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(k), true);
  do {
    std::vector<Eigen::Index> centers;
    for (Eigen::Index i = 0; i < n; ++i)
      if (mask[static_cast<std::size_t>(i)]) centers.push_back(i);
    best = std::min(best, covering_radius(pts, centers));
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return best;
}

}  // namespace

TEST_CASE("greedy k-center is within twice the optimal radius") {
  std::mt19937_64 gen(19);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index n = 4 + static_cast<Eigen::Index>(gen() % 9);
    const std::size_t k = 1 + gen() % 3;
    const Matrix pts = test::random_matrix(2, n, gen);
    const auto centers = greedy_k_center(pts, k, Matrix(2, 0));
    CHECK(centers.size() == k);
    CHECK(covering_radius(pts, centers) <= 2.0 * optimal_k_center_radius(pts, k) + 1e-12);
  }
}

TEST_CASE("gradient embeddings and perturbation uncertainty shapes") {
  Fixture f;
  const auto& u = f.stream[0].unlabeled;
  const Matrix g = gradient_embeddings(f.ep0.model, u);
  CHECK(g.rows() == f.ep0.model.hidden() * 2);
  CHECK(g.cols() == static_cast<Eigen::Index>(u.size()));
  Rng rng(1);
  const Vector var = perturbation_uncertainty(f.ep0.model, u, Vector::Constant(4, 0.05), 10, rng);
  CHECK(var.size() == static_cast<Eigen::Index>(u.size()));
  CHECK((var.array() >= 0.0).all());
  Rng rng2(1);
  const Vector none = perturbation_uncertainty(f.ep0.model, u, Vector::Zero(4), 10, rng2);
  CHECK(none.cwiseAbs().maxCoeff() < 1e-20);
}
