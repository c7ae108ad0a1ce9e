#include "acil/classifier.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

namespace acil {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1", "train.epochs");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1", "train.batch_size");
  if (!(learning_rate > 0.0))
    throw ConfigError("train.learning_rate must be > 0", "train.learning_rate");
  if (!(lambda >= 0.0)) throw ConfigError("train.lambda must be >= 0", "train.lambda");
  if (!(temperature > 0.0))
    throw ConfigError("train.temperature must be > 0", "train.temperature");
  if (alpha_mode == AlphaMode::Constant && !(alpha > 0.0))
    throw ConfigError("train.alpha must be > 0", "train.alpha");
  if (hidden < 0) throw ConfigError("train.hidden must be >= 0", "train.hidden");
  if (!(widen_noise >= 0.0))
    throw ConfigError("train.widen_noise must be >= 0", "train.widen_noise");
}

Vector predict_proba(const Classifier& model, const Sample& x) {
  return model.predict_proba(x.features).col(0);
}

Vector embed(const Classifier& model, const Sample& x) {
  return model.embed(x.features).col(0);
}

Matrix feature_matrix(std::span<const Sample> samples) {
  if (samples.empty()) return {};
  Matrix x(samples.front().features.size(), static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].features.size() != x.rows())
      throw ContractViolation("samples have inconsistent feature dimensions");
    x.col(static_cast<Eigen::Index>(i)) = samples[i].features;
  }
  return x;
}

namespace {

LossBatch<double> make_batch(const Classifier& model, std::span<const Sample> samples,
                             const std::map<ClassId, double>& class_weight,
                             std::size_t distill_from) {
  LossBatch<double> batch;
  batch.inputs = feature_matrix(samples);
  batch.weights.resize(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int row = model.index_of(samples[i].true_label);
    if (row < 0)
      throw ContractViolation("label " + std::to_string(samples[i].true_label) +
                              " is not a model class");
    batch.targets.push_back(row);
    const auto it = class_weight.find(samples[i].true_label);
    batch.weights[static_cast<Eigen::Index>(i)] = it == class_weight.end() ? 0.0 : it->second;
    batch.distill.push_back(i >= distill_from);
  }
  return batch;
}

}  // namespace

double weighted_ce_loss(const Classifier& model, std::span<const Sample> batch,
                        const std::map<ClassId, int>& class_counts, double alpha) {
  if (batch.empty()) return 0.0;
  std::map<ClassId, double> weights;
  for (const auto& s : batch) {
    const auto it = class_counts.find(s.true_label);
    if (it == class_counts.end() || it->second < 1)
      throw ContractViolation("no class count for label " + std::to_string(s.true_label));
    weights[s.true_label] = alpha / it->second;
  }
  const auto lb = make_batch(model, batch, weights, batch.size());
  return loss_and_gradient<double>(model, lb, nullptr, nullptr).weighted_ce;
}

std::vector<int> student_rows_for(const Classifier& model, const ModelSnapshot& snapshot) {
  std::vector<int> rows;
  for (ClassId c : snapshot.classes()) {
    const int r = model.index_of(c);
    if (r < 0)
      throw ContractViolation("snapshot class " + std::to_string(c) + " missing from model");
    rows.push_back(r);
  }
  return rows;
}

double distillation_loss(const Classifier& model, const ModelSnapshot& snapshot,
                         std::span<const Sample> batch, double temperature) {
  if (batch.empty()) return 0.0;
  if (!(temperature > 0.0)) throw ContractViolation("temperature must be > 0");
  const std::vector<int> rows = student_rows_for(model, snapshot);
  const Matrix x = feature_matrix(batch);
  const Matrix student_logits = model.logits(x);
  Matrix student(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    student.row(static_cast<Eigen::Index>(r)) = student_logits.row(rows[r]);
  const Matrix q = softmax(snapshot.model().logits(x) / temperature);
  const Matrix logp = log_softmax(student / temperature);
  return -(q.array() * logp.array()).sum() / static_cast<double>(x.cols());
}

namespace {

class Stepper {
 public:
  Stepper(const TrainConfig& cfg, const MlpParams<double>& like)
      : cfg_(cfg) {
    if (cfg.optimizer == Optimizer::Adam) {
      m_ = like.zeros_like();
      v_ = like.zeros_like();
    }
  }

  void step(MlpParams<double>& p, const MlpParams<double>& g) {
    if (cfg_.optimizer == Optimizer::Sgd) {
      for (Eigen::Index i = 0; i < p.size(); ++i) p.at(i) -= cfg_.learning_rate * g.at(i);
      return;
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, t_);
    const double c2 = 1.0 - std::pow(beta2, t_);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      double& m = m_.at(i);
      double& v = v_.at(i);
      m = beta1 * m + (1.0 - beta1) * g.at(i);
      v = beta2 * v + (1.0 - beta2) * g.at(i) * g.at(i);
      p.at(i) -= cfg_.learning_rate * (m / c1) / (std::sqrt(v / c2) + eps);
    }
  }

 private:
  const TrainConfig& cfg_;
  MlpParams<double> m_, v_;
  int t_ = 0;
};

}  // namespace

TrainOutcome train_model(const Classifier* warm_start, std::span<const Sample> labeled,
                         std::span<const Sample> exemplars, const ModelSnapshot* snapshot,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (labeled.empty() && exemplars.empty()) throw ContractViolation("empty training pool");
  if (snapshot && snapshot->empty()) snapshot = nullptr;

  std::vector<Sample> pool(labeled.begin(), labeled.end());
  pool.insert(pool.end(), exemplars.begin(), exemplars.end());
  const std::size_t distill_from = labeled.size();

  std::vector<ClassId> classes;
  if (warm_start) classes = warm_start->classes();
  else if (snapshot) classes = snapshot->classes();
  std::set<ClassId> fresh;
  for (const auto& s : pool)
    if (std::find(classes.begin(), classes.end(), s.true_label) == classes.end())
      fresh.insert(s.true_label);

  Rng rng(cfg.seed);
  Classifier model;
  if (warm_start) {
    model = *warm_start;
    const int old_rows = model.num_classes();
    std::vector<ClassId> add(fresh.begin(), fresh.end());
    model.widen(add);
    auto& w2 = model.params().w2;
    for (Eigen::Index r = old_rows; r < w2.rows(); ++r)
      for (Eigen::Index c = 0; c < w2.cols(); ++c)
        w2(r, c) = cfg.widen_noise * standard_normal(rng);
  } else {
    classes.insert(classes.end(), fresh.begin(), fresh.end());
    const int dim = static_cast<int>(pool.front().features.size());
    model = Classifier::initialized(dim, cfg.hidden, classes, rng);
  }

  // Class weights w_j = alpha / n_j over the whole pool.
  std::map<ClassId, int> counts;
  for (const auto& s : pool) ++counts[s.true_label];
  const double alpha = cfg.alpha_mode == AlphaMode::Balanced
                           ? static_cast<double>(pool.size()) / static_cast<double>(counts.size())
                           : cfg.alpha;
  std::map<ClassId, double> class_weight;
  for (const auto& [c, n] : counts) class_weight[c] = alpha / n;

  std::optional<DistillTeacher<double>> teacher;
  if (snapshot && cfg.lambda > 0.0 && !exemplars.empty()) {
    teacher = DistillTeacher<double>{&snapshot->model(), student_rows_for(model, *snapshot),
                                     cfg.lambda, cfg.temperature};
  }
  const DistillTeacher<double>* teacher_ptr = teacher ? &*teacher : nullptr;

  const LossBatch<double> full = make_batch(model, pool, class_weight, distill_from);

  TrainOutcome out;
  out.initial_loss = loss_and_gradient<double>(model, full, teacher_ptr, nullptr).total;

  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Stepper stepper(cfg, model.params());
  MlpParams<double> grad;
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  LossBatch<double> batch;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t len = std::min(bs, order.size() - start);
      batch.inputs.resize(full.inputs.rows(), static_cast<Eigen::Index>(len));
      batch.weights.resize(static_cast<Eigen::Index>(len));
      batch.targets.resize(len);
      batch.distill.resize(len);
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t i = order[start + k];
        batch.inputs.col(static_cast<Eigen::Index>(k)) = full.inputs.col(static_cast<Eigen::Index>(i));
        batch.weights[static_cast<Eigen::Index>(k)] = full.weights[static_cast<Eigen::Index>(i)];
        batch.targets[k] = full.targets[i];
        batch.distill[k] = full.distill[i];
      }
      const LossValue v = loss_and_gradient(model, batch, teacher_ptr, &grad);
      if (!std::isfinite(v.total) || !grad.all_finite())
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch), epoch);
      epoch_loss += v.total * static_cast<double>(len);
      stepper.step(model.params(), grad);
    }
    out.epoch_losses.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  if (!model.params().all_finite())
    throw DivergenceError("non-finite parameters after training", cfg.epochs - 1);

  out.snapshot = ModelSnapshot(model);
  out.model = std::move(model);
  return out;
}

TrainOutcome train_episode(const Classifier* warm_start, const EpisodeData& episode,
                           const ModelSnapshot* snapshot, const TrainConfig& cfg) {
  if (episode.labeled.empty()) throw ContractViolation("episode has no labeled samples");
  return train_model(warm_start, episode.labeled, episode.incoming_exemplars, snapshot, cfg);
}

double accuracy(const Classifier& model, std::span<const Sample> samples) {
  if (samples.empty()) return 0.0;
  const Matrix logits = model.logits(feature_matrix(samples));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Eigen::Index best = 0;
    logits.col(static_cast<Eigen::Index>(i)).maxCoeff(&best);
    if (model.classes()[static_cast<std::size_t>(best)] == samples[i].true_label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

namespace {

void write_value(std::ostream& out, double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.write(buf.data(), ptr - buf.data());
}

void write_matrix(std::ostream& out, const char* name, const Matrix& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      write_value(out, m(r, c));
    }
    out << '\n';
  }
}

void write_vector(std::ostream& out, const char* name, const Vector& v) {
  out << name << ' ' << v.size() << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out << ' ';
    write_value(out, v[i]);
  }
  out << '\n';
}

void expect(std::istream& in, const std::string& word) {
  std::string got;
  if (!(in >> got) || got != word) throw ParseError("checkpoint: expected '" + word + "', got '" + got + "'");
}

double read_value(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw ParseError("checkpoint: truncated parameter block");
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError("checkpoint: bad value '" + tok + "'");
  return v;
}

void read_matrix(std::istream& in, const char* name, Matrix& m) {
  expect(in, name);
  Eigen::Index rows = 0, cols = 0;
  if (!(in >> rows >> cols) || rows != m.rows() || cols != m.cols())
    throw ParseError(std::string("checkpoint: shape mismatch for ") + name);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = read_value(in);
}

void read_vector(std::istream& in, const char* name, Vector& v) {
  expect(in, name);
  Eigen::Index n = 0;
  if (!(in >> n) || n != v.size())
    throw ParseError(std::string("checkpoint: shape mismatch for ") + name);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = read_value(in);
}

}  // namespace

void save_checkpoint(std::ostream& out, const Classifier& model) {
  out << "acil-checkpoint 1\n";
  out << "input_dim " << model.input_dim() << '\n';
  out << "hidden " << model.hidden() << '\n';
  out << "classes " << model.num_classes();
  for (ClassId c : model.classes()) out << ' ' << c;
  out << '\n';
  const auto& p = model.params();
  write_matrix(out, "w1", p.w1);
  write_vector(out, "b1", p.b1);
  write_matrix(out, "w2", p.w2);
  write_vector(out, "b2", p.b2);
}

Classifier load_checkpoint(std::istream& in) {
  expect(in, "acil-checkpoint");
  int version = 0;
  if (!(in >> version) || version != 1)
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  int input_dim = 0, hidden = 0, count = 0;
  expect(in, "input_dim");
  in >> input_dim;
  expect(in, "hidden");
  in >> hidden;
  expect(in, "classes");
  in >> count;
  if (!in || input_dim < 1 || hidden < 0 || count < 0)
    throw ParseError("checkpoint: bad architecture header");
  std::vector<ClassId> classes(static_cast<std::size_t>(count));
  for (auto& c : classes)
    if (!(in >> c)) throw ParseError("checkpoint: truncated class list");
  Classifier model(input_dim, hidden, classes);
  auto& p = model.params();
  read_matrix(in, "w1", p.w1);
  read_vector(in, "b1", p.b1);
  read_matrix(in, "w2", p.w2);
  read_vector(in, "b2", p.b2);
  return model;
}

}  // namespace acil
