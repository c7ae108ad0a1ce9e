#ifndef ACIL_CLASSIFIER_HPP
#define ACIL_CLASSIFIER_HPP

#include <algorithm>
#include <cmath>
#include <iosfwd>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acil/common.hpp"
#include "acil/datastream.hpp"
#include "acil/random.hpp"

namespace acil {

// ---------------------------------------------------------------------------
// Column-wise softmax helpers. Each column of `logits` is one sample.

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> softmax(
    const Eigen::MatrixBase<Derived>& logits) {
  using S = typename Derived::Scalar;
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const S shift = logits.col(j).maxCoeff();
    out.col(j) = (logits.col(j).array() - shift).exp().matrix();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> log_softmax(
    const Eigen::MatrixBase<Derived>& logits) {
  using S = typename Derived::Scalar;
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const S shift = logits.col(j).maxCoeff();
    const S lse = shift + std::log((logits.col(j).array() - shift).exp().sum());
    out.col(j) = (logits.col(j).array() - lse).matrix();
  }
  return out;
}

/// Shannon entropy (natural log) of one distribution, with 0 log 0 = 0.
/// No validation; see entropy().
template <typename Derived>
typename Derived::Scalar entropy_unchecked(const Eigen::MatrixBase<Derived>& p) {
  using S = typename Derived::Scalar;
  S h = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p(i) > 0) h -= p(i) * std::log(p(i));
  return h;
}

/// Shannon entropy of a probability vector. Throws ContractViolation on negative
/// entries or a total that deviates from 1 by more than 1e-6.
template <typename Derived>
typename Derived::Scalar entropy(const Eigen::MatrixBase<Derived>& p) {
  using S = typename Derived::Scalar;
  S total = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) < 0 || !std::isfinite(static_cast<double>(p(i))))
      throw ContractViolation("entropy: negative or non-finite probability");
    total += p(i);
  }
  if (std::abs(static_cast<double>(total) - 1.0) > 1e-6)
    throw ContractViolation("entropy: probabilities sum to " + std::to_string(static_cast<double>(total)));
  return entropy_unchecked(p);
}

// ---------------------------------------------------------------------------
// One-hidden-layer ReLU network with a softmax head. hidden == 0 gives a
// linear softmax model whose embedding is the input itself.

template <typename S>
struct MlpParams {
  using MatrixS = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using VectorS = Eigen::Matrix<S, Eigen::Dynamic, 1>;

  MatrixS w1;  // hidden x input
  VectorS b1;  // hidden
  MatrixS w2;  // classes x embedding
  VectorS b2;  // classes

  MlpParams zeros_like() const {
    return {MatrixS::Zero(w1.rows(), w1.cols()), VectorS::Zero(b1.size()),
            MatrixS::Zero(w2.rows(), w2.cols()), VectorS::Zero(b2.size())};
  }

  bool all_finite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
  }

  /// Flattened view order: w1, b1, w2, b2 (column-major within each).
  Eigen::Index size() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

  S& at(Eigen::Index i) {
    if (i < w1.size()) return w1.data()[i];
    i -= w1.size();
    if (i < b1.size()) return b1.data()[i];
    i -= b1.size();
    if (i < w2.size()) return w2.data()[i];
    return b2.data()[i - w2.size()];
  }
  S at(Eigen::Index i) const { return const_cast<MlpParams&>(*this).at(i); }
};

template <typename S>
class Mlp {
 public:
  using MatrixS = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using VectorS = Eigen::Matrix<S, Eigen::Dynamic, 1>;

  struct Activations {
    MatrixS pre_hidden;  // empty when hidden == 0
    MatrixS embedding;   // hidden activations, or the input when hidden == 0
    MatrixS logits;
  };

  Mlp() = default;

  /// All-zero parameters.
  Mlp(int input_dim, int hidden, std::vector<ClassId> classes)
      : input_dim_(input_dim), hidden_(hidden), classes_(std::move(classes)) {
    if (input_dim < 1 || hidden < 0) throw ContractViolation("Mlp: bad architecture");
    params_.w1 = MatrixS::Zero(hidden, input_dim);
    params_.b1 = VectorS::Zero(hidden);
    params_.w2 = MatrixS::Zero(num_classes(), embedding_dim());
    params_.b2 = VectorS::Zero(num_classes());
  }

  /// He-normal hidden weights, Glorot-normal output weights, zero biases.
  static Mlp initialized(int input_dim, int hidden, std::vector<ClassId> classes, Rng& rng) {
    Mlp m(input_dim, hidden, std::move(classes));
    const double s1 = std::sqrt(2.0 / input_dim);
    for (Eigen::Index i = 0; i < m.params_.w1.size(); ++i)
      m.params_.w1.data()[i] = static_cast<S>(s1 * standard_normal(rng));
    const double s2 = std::sqrt(2.0 / (m.embedding_dim() + m.num_classes()));
    for (Eigen::Index i = 0; i < m.params_.w2.size(); ++i)
      m.params_.w2.data()[i] = static_cast<S>(s2 * standard_normal(rng));
    return m;
  }

  int input_dim() const noexcept { return input_dim_; }
  int hidden() const noexcept { return hidden_; }
  int embedding_dim() const noexcept { return hidden_ > 0 ? hidden_ : input_dim_; }
  int num_classes() const noexcept { return static_cast<int>(classes_.size()); }
  const std::vector<ClassId>& classes() const noexcept { return classes_; }

  /// Output row of class `c`, or -1.
  int index_of(ClassId c) const noexcept {
    for (std::size_t i = 0; i < classes_.size(); ++i)
      if (classes_[i] == c) return static_cast<int>(i);
    return -1;
  }

  MlpParams<S>& params() noexcept { return params_; }
  const MlpParams<S>& params() const noexcept { return params_; }

  /// Forward pass over a batch stored one sample per column.
  Activations forward(const Eigen::Ref<const MatrixS>& x) const {
    check_input(x.rows());
    Activations a;
    if (hidden_ > 0) {
      a.pre_hidden = (params_.w1 * x).colwise() + params_.b1;
      a.embedding = a.pre_hidden.cwiseMax(S(0));
    } else {
      a.embedding = x;
    }
    a.logits = (params_.w2 * a.embedding).colwise() + params_.b2;
    return a;
  }

  MatrixS logits(const Eigen::Ref<const MatrixS>& x) const { return forward(x).logits; }
  MatrixS embed(const Eigen::Ref<const MatrixS>& x) const { return forward(x).embedding; }
  MatrixS predict_proba(const Eigen::Ref<const MatrixS>& x) const { return softmax(logits(x)); }

  /// Append output rows for `new_classes` (zero weights, zero bias). Existing
  /// rows, and therefore old-class logits, are untouched.
  void widen(std::span<const ClassId> new_classes) {
    std::vector<ClassId> added;
    for (ClassId c : new_classes)
      if (index_of(c) < 0 && std::find(added.begin(), added.end(), c) == added.end())
        added.push_back(c);
    if (added.empty()) return;
    const Eigen::Index old_rows = params_.w2.rows();
    const Eigen::Index rows = old_rows + static_cast<Eigen::Index>(added.size());
    params_.w2.conservativeResize(rows, Eigen::NoChange);
    params_.b2.conservativeResize(rows);
    params_.w2.bottomRows(rows - old_rows).setZero();
    params_.b2.tail(rows - old_rows).setZero();
    classes_.insert(classes_.end(), added.begin(), added.end());
  }

 private:
  void check_input(Eigen::Index rows) const {
    if (rows != input_dim_)
      throw ContractViolation("feature dimension " + std::to_string(rows) +
                              " does not match model input " + std::to_string(input_dim_));
  }

  int input_dim_ = 0;
  int hidden_ = 0;
  std::vector<ClassId> classes_;
  MlpParams<S> params_;
};

// ---------------------------------------------------------------------------
// Loss L = L_WCE + lambda * L_D and its gradient.

/// A training batch, one sample per column of `inputs`.
template <typename S>
struct LossBatch {
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> inputs;
  std::vector<int> targets;                     // output row of each sample's label
  Eigen::Matrix<S, Eigen::Dynamic, 1> weights;  // class weight w_{y_i} per sample
  std::vector<bool> distill;                    // sample is an exemplar (distillation target)
};

/// Teacher for the distillation term: a frozen model plus, for each of its
/// output rows, the matching output row in the student.
template <typename S>
struct DistillTeacher {
  const Mlp<S>* model = nullptr;
  std::vector<int> student_rows;
  S lambda = 1;
  S temperature = 2;
};

struct LossValue {
  double weighted_ce = 0.0;
  double distillation = 0.0;
  double total = 0.0;
};

/// Evaluate the loss on `batch`; when `grad` is non-null it receives dL/dparams.
/// L_WCE is averaged over all columns, L_D over the distillation columns only.
template <typename S>
LossValue loss_and_gradient(const Mlp<S>& model, const LossBatch<S>& batch,
                            const DistillTeacher<S>* teacher, MlpParams<S>* grad) {
  using MatrixS = typename Mlp<S>::MatrixS;
  const Eigen::Index n = batch.inputs.cols();
  LossValue value;
  if (n == 0) {
    if (grad) *grad = model.params().zeros_like();
    return value;
  }

  const auto act = model.forward(batch.inputs);
  const MatrixS logp = log_softmax(act.logits);
  MatrixS dlogits = logp.array().exp().matrix();  // softmax probabilities

  S wce = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = batch.targets[static_cast<std::size_t>(i)];
    const S w = batch.weights[i];
    wce -= w * logp(y, i);
    dlogits.col(i) *= w;
    dlogits(y, i) -= w;
  }
  wce /= static_cast<S>(n);
  dlogits /= static_cast<S>(n);

  S distill = 0;
  if (teacher && teacher->model && teacher->lambda != S(0)) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index i = 0; i < n; ++i)
      if (batch.distill[static_cast<std::size_t>(i)]) cols.push_back(i);
    if (!cols.empty()) {
      const auto& rows = teacher->student_rows;
      const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
      const Eigen::Index nd = static_cast<Eigen::Index>(cols.size());
      MatrixS x(batch.inputs.rows(), nd);
      MatrixS student(m, nd);
      for (Eigen::Index c = 0; c < nd; ++c) {
        x.col(c) = batch.inputs.col(cols[static_cast<std::size_t>(c)]);
        for (Eigen::Index r = 0; r < m; ++r)
          student(r, c) = act.logits(rows[static_cast<std::size_t>(r)], cols[static_cast<std::size_t>(c)]);
      }
      const S t = teacher->temperature;
      const MatrixS q = softmax(teacher->model->logits(x) / t);
      const MatrixS logp_t = log_softmax(student / t);
      distill = -(q.array() * logp_t.array()).sum() / static_cast<S>(nd);
      // d/dz of -sum q log softmax(z/T) = (softmax(z/T) - q) / T.
      const S scale = teacher->lambda / (t * static_cast<S>(nd));
      const MatrixS dstudent = (logp_t.array().exp() - q.array()).matrix() * scale;
      for (Eigen::Index c = 0; c < nd; ++c)
        for (Eigen::Index r = 0; r < m; ++r)
          dlogits(rows[static_cast<std::size_t>(r)], cols[static_cast<std::size_t>(c)]) +=
              dstudent(r, c);
    }
    value.distillation = static_cast<double>(distill);
    value.total = static_cast<double>(wce + teacher->lambda * distill);
  } else {
    value.total = static_cast<double>(wce);
  }
  value.weighted_ce = static_cast<double>(wce);

  if (grad) {
    const auto& p = model.params();
    grad->w2 = dlogits * act.embedding.transpose();
    grad->b2 = dlogits.rowwise().sum();
    if (model.hidden() > 0) {
      const MatrixS dhidden =
          ((p.w2.transpose() * dlogits).array() * (act.pre_hidden.array() > S(0)).template cast<S>())
              .matrix();
      grad->w1 = dhidden * batch.inputs.transpose();
      grad->b1 = dhidden.rowwise().sum();
    } else {
      grad->w1 = MatrixS::Zero(p.w1.rows(), p.w1.cols());
      grad->b1 = Mlp<S>::VectorS::Zero(p.b1.size());
    }
  }
  return value;
}

// ---------------------------------------------------------------------------
// Double-precision classifier used by selection and the harness.

using Classifier = Mlp<double>;

/// Frozen copy of a trained classifier.
class ModelSnapshot {
 public:
  ModelSnapshot() = default;
  explicit ModelSnapshot(Classifier model)
      : model_(std::make_shared<const Classifier>(std::move(model))) {}

  bool empty() const noexcept { return !model_; }
  const Classifier& model() const { return *model_; }
  const std::vector<ClassId>& classes() const { return model_->classes(); }

 private:
  std::shared_ptr<const Classifier> model_;
};

enum class AlphaMode { Balanced, Constant };
enum class Optimizer { Sgd, Adam };

struct TrainConfig {
  int epochs = 60;
  int batch_size = 32;
  double learning_rate = 0.05;
  double lambda = 1.0;
  double temperature = 2.0;
  AlphaMode alpha_mode = AlphaMode::Balanced;  // alpha = |L| / C
  double alpha = 1.0;                          // used when alpha_mode == Constant
  int hidden = 32;
  Optimizer optimizer = Optimizer::Sgd;
  bool warm_start = false;
  double widen_noise = 1e-3;  // std of the perturbation on freshly widened output rows
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainOutcome {
  Classifier model;
  ModelSnapshot snapshot;
  double initial_loss = 0.0;          // full-pool loss before the first update
  std::vector<double> epoch_losses;   // size-weighted mean of minibatch losses
};

Vector predict_proba(const Classifier& model, const Sample& x);
Vector embed(const Classifier& model, const Sample& x);

/// Stack sample features as columns.
Matrix feature_matrix(std::span<const Sample> samples);

/// (1/|L|) sum_i w_{y_i} (-log p_{i,y_i}) with w_j = alpha / n_j.
double weighted_ce_loss(const Classifier& model, std::span<const Sample> batch,
                        const std::map<ClassId, int>& class_counts, double alpha);

/// Mean over `batch` of the cross-entropy between the snapshot's temperature-softened
/// distribution over its classes and the model's softened distribution restricted
/// to those classes. Zero for an empty batch.
double distillation_loss(const Classifier& model, const ModelSnapshot& snapshot,
                         std::span<const Sample> batch, double temperature);

/// Output rows in `model` of each snapshot class. Throws if one is missing.
std::vector<int> student_rows_for(const Classifier& model, const ModelSnapshot& snapshot);

/// Train on `labeled` plus `exemplars` with L = L_WCE + lambda * L_D, the
/// distillation term taken on the exemplars against `snapshot`.
/// Output classes: those of `warm_start` (or of `snapshot` when cold), then any
/// new class in the pool, ascending.
TrainOutcome train_model(const Classifier* warm_start, std::span<const Sample> labeled,
                         std::span<const Sample> exemplars, const ModelSnapshot* snapshot,
                         const TrainConfig& cfg);

/// Train on X^L_n and E_{n-1} of `episode`.
TrainOutcome train_episode(const Classifier* warm_start, const EpisodeData& episode,
                           const ModelSnapshot* snapshot, const TrainConfig& cfg);

/// Training-set accuracy of argmax predictions.
double accuracy(const Classifier& model, std::span<const Sample> samples);

/// Versioned text checkpoint:
///   acil-checkpoint 1
///   input_dim <d>
///   hidden <h>
///   classes <C> <id_1> ... <id_C>
///   w1 <rows> <cols>   then rows lines of cols values
///   b1 <n>             then one line of n values
///   w2 <rows> <cols>
///   b2 <n>
/// Values are shortest round-trip decimal.
void save_checkpoint(std::ostream& out, const Classifier& model);
Classifier load_checkpoint(std::istream& in);

}  // namespace acil

#endif  // ACIL_CLASSIFIER_HPP
