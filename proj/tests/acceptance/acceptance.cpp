// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "acil/cli.hpp"
#include "acil/harness.hpp"
#include "acil/log.hpp"

using namespace acil;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < limit_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("[%s] %d. %s -- %s; %.2fs (limit %.0fs)%s\n", pass ? "PASS" : "FAIL", id, title,
              o.detail.c_str(), secs, limit_s, in_time ? "" : " TOO SLOW");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(gen);
  return m;
}

// The reference stream: 5 episodes x 2 classes, 10 labeled + 200 unlabeled per
// class, d = 8, MLP h = 32, k = 100.
ExperimentConfig reference_config(Strategy s, int budget = 100) {
  ExperimentConfig cfg;
  cfg.stream.num_episodes = 5;
  cfg.stream.classes_per_episode = 2;
  cfg.stream.labeled_per_class = 10;
  cfg.stream.unlabeled_per_class = 200;
  cfg.stream.feature_dim = 8;
  cfg.train.hidden = 32;
  cfg.strategy = s;
  cfg.budget = budget;
  cfg.num_seeds = 5;
  cfg.seed = 0;
  return cfg;
}

double final_mean(const std::vector<MetricsRecord>& recs, bool use_retention) {
  int last = 0;
  for (const auto& r : recs) last = std::max(last, r.episode);
  double sum = 0.0;
  int n = 0;
  for (const auto& r : recs)
    if (r.episode == last) {
      sum += use_retention ? r.retention : r.incremental_accuracy;
      ++n;
    }
  return n ? sum / n : 0.0;
}

Outcome budget_split() {
  std::mt19937_64 gen(2024);
  int ok = 0;
  for (int t = 0; t < 200; ++t) {
    const int k = 1 + static_cast<int>(gen() % 5000);
    const long e = 1 + static_cast<long>(gen() % 20);
    const long x = static_cast<long>(gen() % 40);
    // Round-half-up of k*e/(e+x) in exact integer arithmetic.
    const long expect_u = (2L * k * e + (e + x)) / (2L * (e + x));
    const auto s = split_budget(k, static_cast<std::size_t>(e), static_cast<std::size_t>(x));
    if (s.k_unlabeled == expect_u && s.k_exemplar == k - expect_u && s.k_unlabeled + s.k_exemplar == k &&
        (x != 0 || s.k_unlabeled == k))
      ++ok;
  }
  return {ok == 200, fmt("%.0f/200 triples exact", ok)};
}

Outcome annotation_closed_forms() {
  std::ostringstream detail;
  bool pass = true;
  for (Strategy s : all_strategies()) {
    auto cfg = reference_config(s);
    cfg.num_seeds = 1;
    const auto stream = build_stream(cfg, cfg.seed);
    const auto t = run_replica(cfg, cfg.seed, stream);
    std::vector<int> counts;
    for (const auto& r : t.records) counts.push_back(r.annotated_this_episode);
    bool ok = counts.size() == 5;
    for (std::size_t n = 0; ok && n < counts.size(); ++n) {
      if (is_full_annotation(s)) ok = counts[n] == 420;
      else if (is_al_baseline(s)) ok = counts[n] == 120;
      else
        ok = (n == 0 ? counts[n] == 120 : counts[n] < 120) &&
             counts[n] == 20 + static_cast<int>(t.exemplar_sets[n].count(ExemplarSource::FromUnlabeled));
    }
    if (s == Strategy::Acil || s == Strategy::Random || s == Strategy::Icarl) {
      detail << strategy_name(s) << "=";
      for (std::size_t n = 0; n < counts.size(); ++n) detail << (n ? "/" : "") << counts[n];
      detail << " ";
    }
    pass = pass && ok;
  }
  detail << "(all 8 strategies checked)";
  return {pass, detail.str()};
}

Outcome gradient_check() {
  std::mt19937_64 gen(77);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(static_cast<std::uint64_t>(trial));
    const int d = 2 + trial % 4, hidden = trial % 5 == 0 ? 0 : 4, n = 3 + trial % 6;
    const std::vector<ClassId> classes{0, 1, 2, 3};
    const Classifier model = Classifier::initialized(d, hidden, classes, rng);
    const Classifier old = Classifier::initialized(d, hidden, std::vector<ClassId>{0, 1}, rng);
    LossBatch<double> batch;
    batch.inputs = gaussian(d, n, gen);
    batch.weights = Vector::Constant(n, 1.0 + 0.1 * trial);
    for (int i = 0; i < n; ++i) {
      batch.targets.push_back(i % 4);
      batch.distill.push_back(i % 4 < 2);
    }
    const DistillTeacher<double> teacher{&old, {0, 1}, 1.0, 2.0};
    MlpParams<double> g;
    loss_and_gradient<double>(model, batch, &teacher, &g);
    Classifier probe = model;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const double orig = probe.params().at(i);
      probe.params().at(i) = orig + 1e-5;
      const double up = loss_and_gradient<double>(probe, batch, &teacher, nullptr).total;
      probe.params().at(i) = orig - 1e-5;
      const double down = loss_and_gradient<double>(probe, batch, &teacher, nullptr).total;
      probe.params().at(i) = orig;
      const double numeric = (up - down) / 2e-5;
      const double scale = std::max({std::abs(numeric), std::abs(g.at(i)), 1e-6});
      worst = std::max(worst, std::abs(numeric - g.at(i)) / scale);
    }
  }
  return {worst < 1e-4, fmt("20 instances, worst relative error %.2e (tol 1e-4)", worst)};
}

Outcome kmeans_properties() {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  int monotone = 0;
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index n = 10 + static_cast<Eigen::Index>(gen() % 90);
    const Matrix pts = gaussian(3, n, gen);
    Vector w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = u(gen);
    const auto res = weighted_kmeans(pts, w, 2 + t % 6, static_cast<std::uint64_t>(t));
    bool ok = true;
    for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
      ok = ok && res.objective_trace[i] <= res.objective_trace[i - 1] * (1.0 + 1e-12);
    monotone += ok;
  }
  int brute = 0;
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(gen() % 50);
    const Matrix pts = gaussian(4, n, gen);
    Vector w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = u(gen);
    std::vector<SampleId> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    const Vector c = pts * w / w.sum();
    SampleId best = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if ((pts.col(i) - c).squaredNorm() < (pts.col(best) - c).squaredNorm()) best = i;
    const auto got = weighted_kmeans_select(ids, pts, w, 1, static_cast<std::uint64_t>(t));
    brute += got.size() == 1 && got[0] == best;
  }
  int blobs = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Matrix pts = gaussian(2, 60, gen, 0.5);
    pts.rightCols(30).row(1).array() += 10.0;
    std::vector<SampleId> ids(60);
    std::iota(ids.begin(), ids.end(), 0);
    const auto got = weighted_kmeans_select(ids, pts, Vector::Ones(60), 2, seed);
    blobs += got.size() == 2 && ((got[0] < 30) != (got[1] < 30));
  }
  return {monotone == 50 && brute == 50 && blobs >= 9,
          fmt("monotone %.0f/50, B=1 oracle %.0f/50, two blobs %.0f/10 (need >= 9)", monotone, brute, blobs)};
}

Outcome spot_values() {
  double worst_uniform = 0.0;
  for (int c = 2; c <= 20; ++c)
    worst_uniform = std::max(worst_uniform, std::abs(entropy(Vector::Constant(c, 1.0 / c)) - std::log(c)));
  Vector onehot = Vector::Zero(5);
  onehot[3] = 1.0;
  Classifier zero(2, 0, {0, 1});
  const std::vector<Sample> batch{Sample{0, (Vector(2) << 1.0, 2.0).finished(), 0, true},
                                  Sample{1, (Vector(2) << -1.0, 0.5).finished(), 1, true}};
  const double wce = weighted_ce_loss(zero, batch, {{0, 1}, {1, 3}}, 2.0);
  const double expect = 4.0 / 3.0 * std::log(2.0);
  const bool pass = worst_uniform <= 1e-9 && entropy(onehot) == 0.0 && std::abs(wce - expect) <= 1e-9;
  return {pass, fmt("|H(uniform)-lnC| <= %.1e, H(one-hot) = %.1f, weighted CE %.10f vs %.10f", worst_uniform,
                    entropy(onehot), wce, expect)};
}

Outcome baseline_oracles() {
  std::mt19937_64 gen(9);
  int coreset_ok = 0, instances = 0;
  for (int t = 0; t < 60; ++t, ++instances) {
    const Eigen::Index n = 4 + static_cast<Eigen::Index>(gen() % 9);
    const std::size_t k = 1 + gen() % 3;
    const Matrix pts = gaussian(2, n, gen);
    const auto greedy = greedy_k_center(pts, k, Matrix(2, 0));
    double opt = std::numeric_limits<double>::infinity();
    std::vector<bool> mask(static_cast<std::size_t>(n), false);
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(k), true);
    do {
      std::vector<Eigen::Index> cs;
      for (Eigen::Index i = 0; i < n; ++i)
        if (mask[static_cast<std::size_t>(i)]) cs.push_back(i);
      opt = std::min(opt, covering_radius(pts, cs));
    } while (std::prev_permutation(mask.begin(), mask.end()));
    coreset_ok += covering_radius(pts, greedy) <= 2.0 * opt + 1e-12;
  }

  // iCaRL end to end: one exemplar per class must be the class member nearest
  // the class mean in embedding space.
  auto cfg = reference_config(Strategy::Icarl);
  const auto stream = build_stream(cfg, 0);
  TrainConfig tc = cfg.train;
  const auto trained = train_episode(nullptr, stream[0], nullptr, tc);
  SelectionContext ctx;
  ctx.episode = &stream[0];
  ctx.model = &trained.model;
  ctx.budget = 2;
  ctx.seed = 1;
  const auto picks = baseline_select(Strategy::Icarl, ctx);
  int icarl_ok = 0;
  for (const auto& m : picks.members) {
    std::vector<Sample> cls;
    for (const auto* part : {&stream[0].labeled, &stream[0].unlabeled})
      for (const auto& s : *part)
        if (s.true_label == m.true_label) cls.push_back(s);
    const Matrix emb = trained.model.embed(feature_matrix(cls));
    const Vector mu = emb.rowwise().mean();
    std::size_t best = 0;
    for (std::size_t i = 1; i < cls.size(); ++i)
      if ((emb.col(static_cast<Eigen::Index>(i)) - mu).norm() < (emb.col(static_cast<Eigen::Index>(best)) - mu).norm())
        best = i;
    icarl_ok += cls[best].id == m.id;
  }

  int gdumb_ok = 0, gdumb_runs = 0;
  for (int k : {1, 7, 10, 33, 100, 401}) {
    ctx.budget = k;
    const auto e = baseline_select(Strategy::Gdumb, ctx);
    std::map<ClassId, int> per{{0, 0}, {1, 0}};
    for (const auto& m : e.members) ++per[m.true_label];
    int lo = k, hi = 0;
    for (auto [c, v] : per) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    gdumb_ok += hi - lo <= 1 && static_cast<int>(e.size()) == k;
    ++gdumb_runs;
  }
  const bool pass = coreset_ok == instances && icarl_ok == 2 && gdumb_ok == gdumb_runs;
  return {pass, fmt("coreset <= 2x optimum %.0f/%.0f, iCaRL first pick %.0f/2, GDumb balanced %.0f/6",
                    coreset_ok, instances, icarl_ok, gdumb_ok)};
}

Outcome forgetting_ordering() {
  const auto acil = run_experiment(reference_config(Strategy::Acil));
  const auto random = run_experiment(reference_config(Strategy::Random));
  const auto finetune = run_experiment(reference_config(Strategy::Finetuning));
  const double a_acc = final_mean(acil.records, false), r_acc = final_mean(random.records, false);
  const double a_ret = final_mean(acil.records, true), f_ret = final_mean(finetune.records, true);
  const bool complete = acil.failures.empty() && random.failures.empty() && finetune.failures.empty();
  const bool pass = complete && a_acc - r_acc >= 0.05 && a_ret - f_ret >= 0.20;
  return {pass, fmt("accuracy ACIL %.4f vs Random %.4f (need +0.05); retention ACIL %.4f vs Finetuning %.4f "
                    "(need +0.20)",
                    a_acc, r_acc, a_ret, f_ret)};
}

Outcome budget_monotonicity() {
  std::vector<double> acc;
  std::vector<std::vector<MetricsRecord>> runs;
  for (int k : {50, 100, 250}) {
    auto res = run_experiment(reference_config(Strategy::Acil, k));
    if (!res.failures.empty()) return {false, "diverged seed"};
    acc.push_back(final_mean(res.records, false));
    runs.push_back(std::move(res.records));
  }
  bool acc_ok = acc[1] >= acc[0] - 0.02 && acc[2] >= acc[1] - 0.02;
  bool count_ok = true;
  for (std::size_t b = 1; b < runs.size(); ++b)
    for (std::size_t i = 0; i < runs[b].size(); ++i)
      count_ok = count_ok && runs[b][i].annotated_this_episode >= runs[b - 1][i].annotated_this_episode;
  return {acc_ok && count_ok,
          fmt("final accuracy k=50: %.4f, k=100: %.4f, k=250: %.4f (band 0.02); per-episode counts ", acc[0],
              acc[1], acc[2]) +
              (count_ok ? "non-decreasing" : "DECREASE found")};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "acil_acceptance_determinism";
  fs::remove_all(root);
  const std::vector<std::string> base{"--set", "seed=7", "--set", "num_seeds=3"};
  for (const char* sub : {"a", "b"}) {
    std::vector<std::string> args{"sweep", "--out", (root / sub).string()};
    args.insert(args.end(), base.begin(), base.end());
    if (cli::run_cli(args) != 0) return {false, "sweep failed"};
  }
  std::size_t files = 0, equal = 0;
  for (const auto& e : fs::directory_iterator(root / "a")) {
    ++files;
    equal += slurp(e.path()) == slurp(root / "b" / e.path().filename());
  }
  return {files > 0 && equal == files, fmt("%.0f/%.0f output files byte-identical across repeated sweeps",
                                           equal, files)};
}

}  // namespace

int main() {
  log::threshold() = log::Level::Off;
  criterion(1, "budget split exactness", 1, budget_split);
  criterion(2, "annotation closed forms", 60, annotation_closed_forms);
  criterion(3, "loss gradient check", 10, gradient_check);
  criterion(4, "weighted k-means properties", 30, kmeans_properties);
  criterion(5, "entropy and loss spot values", 1, spot_values);
  criterion(6, "baseline oracles", 60, baseline_oracles);
  criterion(7, "forgetting ordering", 600, forgetting_ordering);
  criterion(8, "budget monotonicity", 1800, budget_monotonicity);
  criterion(9, "determinism", 600, determinism);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
