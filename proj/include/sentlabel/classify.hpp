#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sentlabel/csv.hpp"
#include "sentlabel/factorization.hpp"
#include "sentlabel/label_matrix.hpp"
#include "sentlabel/random.hpp"

namespace sentlabel {

enum class RepKind { BinaryDirect, SvdScores };

inline const char* to_string(RepKind kind) { return kind == RepKind::BinaryDirect ? "binary" : "svd"; }

inline RepKind parse_rep_kind(const std::string& text) {
  if (text == "binary" || text == "binary-direct") return RepKind::BinaryDirect;
  if (text == "svd" || text == "svd-scores") return RepKind::SvdScores;
  throw std::invalid_argument("unknown representation '" + text + "' (want binary or svd)");
}

/// Labelled vectors, one example per row.
struct RepresentationSet {
  Eigen::MatrixXd vectors;
  std::vector<std::size_t> labels;
  std::size_t n_classes = 0;
  RepKind kind = RepKind::BinaryDirect;

  std::size_t size() const { return labels.size(); }
  Eigen::Index dim() const { return vectors.cols(); }

  void check() const {
    if (vectors.cols() < 1) throw std::invalid_argument("representation dimension must be at least 1");
    if (static_cast<std::size_t>(vectors.rows()) != labels.size())
      throw std::invalid_argument("representation row count differs from label count");
    for (auto y : labels)
      if (y >= n_classes) throw std::invalid_argument("label " + std::to_string(y) + " outside class range");
  }

  RepresentationSet subset(std::span<const std::size_t> rows) const {
    RepresentationSet out;
    out.vectors.resize(static_cast<Eigen::Index>(rows.size()), vectors.cols());
    out.labels.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      out.vectors.row(static_cast<Eigen::Index>(k)) = vectors.row(static_cast<Eigen::Index>(rows[k]));
      out.labels.push_back(labels[rows[k]]);
    }
    out.n_classes = n_classes;
    out.kind = kind;
    return out;
  }
};

// ---------------------------------------------------------------------------
// Multinomial logistic regression

struct LogRegConfig {
  double l2 = 1e-4;
  double step = 1.0;  ///< initial step of the backtracking line search
  std::size_t max_iter = 2000;
  double tol = 1e-6;  ///< stop when the gradient norm falls below this
  RngSeed seed{0};
};

struct TrainingMeta {
  std::size_t iterations = 0;
  double final_loss = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  RngSeed seed{0};
};

struct TrainedClassifier {
  Eigen::MatrixXd weights;  ///< k x d
  Eigen::VectorXd bias;     ///< k
  TrainingMeta meta;

  std::size_t n_classes() const { return static_cast<std::size_t>(weights.rows()); }
};

namespace detail {

/// Row-wise softmax probabilities and the mean cross-entropy of the labels.
inline double softmax_cross_entropy(const Eigen::MatrixXd& logits, std::span<const std::size_t> labels,
                                    Eigen::MatrixXd* probs) {
  const Eigen::Index n = logits.rows();
  double total = 0.0;
  if (probs) probs->resize(n, logits.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double top = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd shifted = logits.row(i).array() - top;
    const double norm = shifted.array().exp().sum();
    total += std::log(norm) - shifted(static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]));
    if (probs) probs->row(i) = shifted.array().exp() / norm;
  }
  return n > 0 ? total / static_cast<double>(n) : 0.0;
}

/// (P - Y) / n, the gradient of the mean cross-entropy w.r.t. the logits.
inline Eigen::MatrixXd logit_gradient(Eigen::MatrixXd probs, std::span<const std::size_t> labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])) -= 1.0;
  return probs / static_cast<double>(labels.size());
}

inline void check_training_set(const RepresentationSet& train) {
  train.check();
  if (train.n_classes < 2) throw std::invalid_argument("train_logreg: need at least two classes");
  std::vector<char> present(train.n_classes, 0);
  for (auto y : train.labels) present[y] = 1;
  if (std::count(present.begin(), present.end(), 1) < 2)
    throw std::invalid_argument("train_logreg: training set contains a single class");
}

}  // namespace detail

/**
 * @brief L2-penalized softmax cross-entropy and its gradient.
 *
 *   loss = (1/n) sum_i -log softmax(W x_i + b)[y_i] + (l2/2) ||W||_F^2
 *
 * The bias is not penalized. Gradients are written when the pointers are set.
 */
inline double softmax_objective(const Eigen::MatrixXd& x, std::span<const std::size_t> labels,
                                const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias, double l2,
                                Eigen::MatrixXd* grad_weights = nullptr, Eigen::VectorXd* grad_bias = nullptr) {
  Eigen::MatrixXd logits = x * weights.transpose();
  logits.rowwise() += bias.transpose();
  Eigen::MatrixXd probs;
  const bool want_grad = grad_weights || grad_bias;
  const double loss = detail::softmax_cross_entropy(logits, labels, want_grad ? &probs : nullptr) +
                      0.5 * l2 * weights.squaredNorm();
  if (want_grad) {
    const Eigen::MatrixXd g = detail::logit_gradient(std::move(probs), labels);
    if (grad_weights) *grad_weights = g.transpose() * x + l2 * weights;
    if (grad_bias) *grad_bias = g.colwise().sum().transpose();
  }
  return loss;
}

namespace detail {

// Gradient descent with Armijo backtracking, shared by the two
// parameterizations below. `State` supplies loss/gradient evaluation.
template <class State>
TrainingMeta descend(State& state, const LogRegConfig& config) {
  TrainingMeta meta;
  meta.seed = config.seed;
  double loss = state.evaluate();
  if (!std::isfinite(loss)) throw std::runtime_error("train_logreg: non-finite initial loss");
  double step = config.step;
  std::size_t it = 0;
  for (; it < config.max_iter; ++it) {
    const double grad_sq = state.gradient_norm_sq();
    meta.gradient_norm = std::sqrt(grad_sq);
    if (meta.gradient_norm < config.tol) {
      meta.converged = true;
      break;
    }
    bool accepted = false;
    bool saw_finite = false;
    while (step > 1e-30) {
      const double trial = state.try_step(step);
      if (std::isfinite(trial)) saw_finite = true;
      if (std::isfinite(trial) && trial <= loss - 0.5 * step * grad_sq) {
        state.accept();
        loss = trial;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!saw_finite) throw std::runtime_error("train_logreg: non-finite loss at every step size");
      break;  // no representable descent step left
    }
    step *= 2.0;
  }
  if (meta.gradient_norm >= config.tol && it == config.max_iter) {
    meta.gradient_norm = std::sqrt(state.gradient_norm_sq());
    meta.converged = meta.gradient_norm < config.tol;
  }
  meta.iterations = it;
  meta.final_loss = loss;
  return meta;
}

/// Parameters (W, b) held directly; cost per evaluation O(n d k).
class PrimalState {
 public:
  PrimalState(const RepresentationSet& train, double l2)
      : x_(train.vectors), labels_(train.labels), l2_(l2),
        w_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(train.n_classes), train.dim())),
        b_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(train.n_classes))) {}

  double evaluate() { return softmax_objective(x_, labels_, w_, b_, l2_, &gw_, &gb_); }
  double gradient_norm_sq() const { return gw_.squaredNorm() + gb_.squaredNorm(); }
  double try_step(double step) {
    tw_ = w_ - step * gw_;
    tb_ = b_ - step * gb_;
    return softmax_objective(x_, labels_, tw_, tb_, l2_, &tgw_, &tgb_);
  }
  void accept() {
    std::swap(w_, tw_);
    std::swap(b_, tb_);
    std::swap(gw_, tgw_);
    std::swap(gb_, tgb_);
  }
  Eigen::MatrixXd weights() const { return w_; }
  Eigen::VectorXd bias() const { return b_; }

 private:
  const Eigen::MatrixXd& x_;
  std::span<const std::size_t> labels_;
  double l2_;
  Eigen::MatrixXd w_, gw_, tw_, tgw_;
  Eigen::VectorXd b_, gb_, tb_, tgb_;
};

/**
 * Weights kept as W = C^T X (C is n x k). Starting from W = 0 every gradient
 * step stays in the row space of X, so this produces the same iterates as
 * PrimalState while each evaluation costs O(n^2 k) through K = X X^T. Used
 * when d > n.
 */
class KernelState {
 public:
  KernelState(const RepresentationSet& train, double l2)
      : x_(train.vectors), labels_(train.labels), l2_(l2), gram_(x_ * x_.transpose()),
        c_(Eigen::MatrixXd::Zero(x_.rows(), static_cast<Eigen::Index>(train.n_classes))),
        b_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(train.n_classes))) {}

  double evaluate() { return objective(c_, b_, h_, gb_, kh_); }
  double gradient_norm_sq() const { return (h_.array() * kh_.array()).sum() + gb_.squaredNorm(); }
  double try_step(double step) {
    tc_ = c_ - step * h_;
    tb_ = b_ - step * gb_;
    return objective(tc_, tb_, th_, tgb_, tkh_);
  }
  void accept() {
    std::swap(c_, tc_);
    std::swap(b_, tb_);
    std::swap(h_, th_);
    std::swap(gb_, tgb_);
    std::swap(kh_, tkh_);
  }
  Eigen::MatrixXd weights() const { return c_.transpose() * x_; }
  Eigen::VectorXd bias() const { return b_; }

 private:
  // h = G + l2 C is the coefficient form of the weight gradient: dW = h^T X.
  double objective(const Eigen::MatrixXd& c, const Eigen::VectorXd& b, Eigen::MatrixXd& h, Eigen::VectorXd& gb,
                   Eigen::MatrixXd& kh) const {
    const Eigen::MatrixXd kc = gram_ * c;
    Eigen::MatrixXd logits = kc;
    logits.rowwise() += b.transpose();
    Eigen::MatrixXd probs;
    const double penalty = 0.5 * l2_ * (c.array() * kc.array()).sum();
    const double loss = softmax_cross_entropy(logits, labels_, &probs) + penalty;
    const Eigen::MatrixXd g = logit_gradient(std::move(probs), labels_);
    h = g + l2_ * c;
    gb = g.colwise().sum().transpose();
    kh = gram_ * h;
    return loss;
  }

  const Eigen::MatrixXd& x_;
  std::span<const std::size_t> labels_;
  double l2_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd c_, h_, kh_, tc_, th_, tkh_;
  Eigen::VectorXd b_, gb_, tb_, tgb_;
};

template <class State>
TrainedClassifier train_with(const RepresentationSet& train, const LogRegConfig& config) {
  State state(train, config.l2);
  TrainedClassifier clf;
  clf.meta = descend(state, config);
  clf.weights = state.weights();
  clf.bias = state.bias();
  if (!clf.weights.allFinite() || !clf.bias.allFinite()) throw std::runtime_error("train_logreg: non-finite weights");
  return clf;
}

}  // namespace detail

enum class LogRegSolver { Auto, Primal, Kernel };

/**
 * @brief Fit multinomial logistic regression by full-batch gradient descent.
 *
 * Starts from zero weights, so the result is a pure function of the data and
 * config. The loss never increases between accepted steps.
 */
inline TrainedClassifier train_logreg(const RepresentationSet& train, const LogRegConfig& config = {},
                                      LogRegSolver solver = LogRegSolver::Auto) {
  detail::check_training_set(train);
  if (!(config.step > 0.0) || !(config.l2 >= 0.0)) throw std::invalid_argument("train_logreg: bad step or l2");
  const bool kernel = solver == LogRegSolver::Kernel ||
                      (solver == LogRegSolver::Auto && train.dim() > static_cast<Eigen::Index>(train.size()));
  return kernel ? detail::train_with<detail::KernelState>(train, config)
                : detail::train_with<detail::PrimalState>(train, config);
}

struct EvalResult {
  double accuracy = 0.0;
  std::size_t n_test = 0;
  std::vector<double> per_class_accuracy;  ///< NaN for classes absent from the test set
  std::vector<std::size_t> per_class_count;
};

/// Argmax prediction; ties go to the lowest class index.
inline std::vector<std::size_t> predict(const TrainedClassifier& clf, const Eigen::MatrixXd& x) {
  if (x.cols() != clf.weights.cols())
    throw std::invalid_argument("predict: input dimension " + std::to_string(x.cols()) + " != classifier dimension " +
                                std::to_string(clf.weights.cols()));
  Eigen::MatrixXd logits = x * clf.weights.transpose();
  logits.rowwise() += clf.bias.transpose();
  std::vector<std::size_t> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(i, c) > logits(i, best)) best = c;
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

inline EvalResult evaluate(const TrainedClassifier& clf, const RepresentationSet& test) {
  test.check();
  const auto predicted = predict(clf, test.vectors);
  const std::size_t k = std::max(clf.n_classes(), test.n_classes);
  EvalResult result;
  result.n_test = test.size();
  result.per_class_count.assign(k, 0);
  std::vector<std::size_t> correct(k, 0);
  std::size_t total_correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    ++result.per_class_count[test.labels[i]];
    if (predicted[i] == test.labels[i]) {
      ++correct[test.labels[i]];
      ++total_correct;
    }
  }
  result.accuracy = test.size() ? static_cast<double>(total_correct) / static_cast<double>(test.size()) : 0.0;
  result.per_class_accuracy.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    result.per_class_accuracy[c] = result.per_class_count[c]
                                       ? static_cast<double>(correct[c]) / static_cast<double>(result.per_class_count[c])
                                       : std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

/// Most frequent label (lowest id on ties).
inline std::size_t majority_class(std::span<const std::size_t> labels, std::size_t n_classes) {
  std::vector<std::size_t> counts(n_classes, 0);
  for (auto y : labels) ++counts.at(y);
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/**
 * Stratified split: each class is shuffled and round(train_fraction * count)
 * of it goes to train, clamped so a class with at least two examples lands
 * in both halves. Index lists come back sorted.
 */
inline Split stratified_split(std::span<const std::size_t> labels, std::size_t n_classes, double train_fraction,
                              RngSeed seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class.at(labels[i]).push_back(i);
  Rng rng(seed);
  Split split;
  for (auto& members : by_class) {
    rng.shuffle(std::span(members));
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    if (members.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
    split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.insert(split.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

// ---------------------------------------------------------------------------
// Right-singular-vector classifier

struct VColumnClassifier {
  double threshold = 0.0;
  int direction = 1;  ///< +1: positive iff score > threshold; -1: positive iff score < threshold
  double train_accuracy = 0.0;
};

/// Score of each row for one label column: the rank-r reconstruction of that column.
inline Eigen::VectorXd v_column_scores(const Factorization& f, std::size_t label_col) {
  if (label_col >= static_cast<std::size_t>(f.v.rows())) throw std::invalid_argument("label column out of range");
  const Eigen::VectorXd weighted = f.sigma.cwiseProduct(f.v.row(static_cast<Eigen::Index>(label_col)).transpose());
  return f.u * weighted;
}

/**
 * @brief Binary classifier for "row has label `label_col`" from a low-rank factorization.
 *
 * Each row scores (U_r Sigma_r)_i . V_r[label_col]. Candidate thresholds are
 * `threshold_grid` evenly spaced points over the train score range plus one
 * point below it; each is tried in both directions and the most accurate
 * (first on ties) is kept.
 */
inline VColumnClassifier v_column_classifier(const Factorization& f, const LabelMatrix& m, std::size_t label_col,
                                             std::span<const std::size_t> train_rows, std::size_t threshold_grid = 256) {
  if (label_col >= m.cols()) throw std::invalid_argument("v_column_classifier: label column out of range");
  if (m.rows() != f.source_rows || m.cols() != f.source_cols)
    throw std::invalid_argument("v_column_classifier: factorization does not match the matrix");
  if (train_rows.empty()) throw std::invalid_argument("v_column_classifier: no training rows");
  if (threshold_grid < 2) throw std::invalid_argument("v_column_classifier: grid needs at least two points");

  const Eigen::VectorXd all_scores = v_column_scores(f, label_col);
  std::vector<double> score;
  std::vector<char> positive;
  for (auto i : train_rows) {
    if (i >= m.rows()) throw std::invalid_argument("v_column_classifier: train row out of range");
    score.push_back(all_scores(static_cast<Eigen::Index>(i)));
    positive.push_back(m.contains(i, label_col) ? 1 : 0);
  }
  const auto n_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), 1));
  if (n_pos == 0 || n_pos == positive.size())
    throw std::invalid_argument("v_column_classifier: label column is constant over the training rows");

  const auto [lo_it, hi_it] = std::minmax_element(score.begin(), score.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> candidates{lo - 1.0};
  for (std::size_t g = 0; g < threshold_grid; ++g)
    candidates.push_back(lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(threshold_grid - 1));

  VColumnClassifier best{candidates.front(), 1, -1.0};
  for (double t : candidates) {
    for (int direction : {1, -1}) {
      std::size_t correct = 0;
      for (std::size_t k = 0; k < score.size(); ++k) {
        const bool predicted = direction * (score[k] - t) > 0.0;
        correct += predicted == static_cast<bool>(positive[k]);
      }
      const double acc = static_cast<double>(correct) / static_cast<double>(score.size());
      if (acc > best.train_accuracy) best = {t, direction, acc};
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Similarity and pair features

enum class CosineMode {
  Cosine,        ///< shared / sqrt(|a| |b|)
  PaperLiteral,  ///< shared / (|a| |b|)
};

inline std::size_t shared_count(std::span<const ColumnIndex> a, std::span<const ColumnIndex> b) {
  std::size_t shared = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++shared;
      ++ia;
      ++ib;
    }
  }
  return shared;
}

/// Cosine similarity of two binary vectors given as sorted index sets.
inline double cosine(std::span<const ColumnIndex> a, std::span<const ColumnIndex> b,
                     CosineMode mode = CosineMode::Cosine) {
  if (a.empty() || b.empty()) throw std::invalid_argument("cosine: empty vector");
  const double shared = static_cast<double>(shared_count(a, b));
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  return mode == CosineMode::Cosine ? shared / std::sqrt(na * nb) : shared / (na * nb);
}

/// [a * b ; |a - b|]
inline Eigen::VectorXd pair_features(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("pair_features: dimensions " + std::to_string(a.size()) + " and " +
                                std::to_string(b.size()) + " differ");
  Eigen::VectorXd out(2 * a.size());
  out.head(a.size()) = a.cwiseProduct(b);
  out.tail(a.size()) = (a - b).cwiseAbs();
  return out;
}

// ---------------------------------------------------------------------------
// External representation CSV: id,label,v0,...,v{d-1}

struct LabelledRepresentations {
  std::vector<std::string> ids;
  RepresentationSet set;
};

inline LabelledRepresentations read_representations(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("representation csv: empty input");
  const auto header = split(line, ',');
  if (header.size() < 3 || header[0] != "id" || header[1] != "label")
    throw std::runtime_error("representation csv: header must be id,label,v0,...");
  const std::size_t d = header.size() - 2;
  for (std::size_t j = 0; j < d; ++j)
    if (header[j + 2] != "v" + std::to_string(j))
      throw std::runtime_error("representation csv: expected column v" + std::to_string(j));

  LabelledRepresentations out;
  std::vector<double> values;
  std::size_t max_label = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != d + 2)
      throw std::runtime_error("representation csv: line " + std::to_string(line_no) + " has wrong field count");
    out.ids.push_back(fields[0]);
    std::size_t label = 0;
    try {
      std::size_t used = 0;
      const long long parsed = std::stoll(fields[1], &used);
      if (parsed < 0 || used != fields[1].size()) throw std::invalid_argument("negative");
      label = static_cast<std::size_t>(parsed);
    } catch (const std::logic_error&) {
      throw std::runtime_error("representation csv: line " + std::to_string(line_no) + ": bad label '" + fields[1] + "'");
    }
    out.set.labels.push_back(label);
    max_label = std::max(max_label, label);
    for (std::size_t j = 0; j < d; ++j) {
      try {
        values.push_back(parse_real(fields[j + 2]));
      } catch (const std::invalid_argument& e) {
        throw std::runtime_error("representation csv: line " + std::to_string(line_no) + ": " + e.what());
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(out.ids.size());
  out.set.vectors = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), n, static_cast<Eigen::Index>(d));
  out.set.n_classes = n > 0 ? max_label + 1 : 0;
  out.set.kind = RepKind::BinaryDirect;
  return out;
}

}  // namespace sentlabel
