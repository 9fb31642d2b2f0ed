#pragma once

// Two-linear-layer network with a quantized ReLU hidden layer and a fixed,
// known second layer. Scores o_i = sum_j v_{i,j} sigma(<w_j, x>).

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "stecgd/dataset.hpp"
#include "stecgd/errors.hpp"
#include "stecgd/parallel.hpp"
#include "stecgd/quantization.hpp"

namespace stecgd {

/// Fixed second-layer weights, stored as an n x k matrix (row i = class i).
///
/// Construction enforces: every class has a unit with a positive weight, each
/// unit feeds at most one class with a positive weight, and 0 <= v < 1.
class SecondLayer {
 public:
  explicit SecondLayer(Matrix values) : values_(std::move(values)) {
    if (values_.rows() < 1 || values_.cols() < 1) {
      throw ConfigError("second layer must have at least one class and one unit");
    }
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
      bool served = false;
      for (Eigen::Index j = 0; j < values_.cols(); ++j) {
        const double v = values_(i, j);
        if (!std::isfinite(v) || v < 0.0 || v >= 1.0) {
          throw ConfigError("second-layer entries must lie in [0, 1)");
        }
        served = served || v > 0.0;
      }
      if (!served) {
        throw ConfigError("class " + std::to_string(i) +
                          " has no hidden unit with positive weight");
      }
    }
    matched_.assign(static_cast<std::size_t>(values_.cols()), -1);
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
      for (Eigen::Index i = 0; i < values_.rows(); ++i) {
        if (values_(i, j) > 0.0) {
          if (matched_[j] >= 0) {
            throw ConfigError("hidden unit " + std::to_string(j) +
                              " has positive weight for more than one class");
          }
          matched_[j] = static_cast<int>(i);
        }
      }
    }
  }

  int classes() const noexcept { return static_cast<int>(values_.rows()); }
  int units() const noexcept { return static_cast<int>(values_.cols()); }
  double operator()(int cls, int unit) const { return values_(cls, unit); }
  const Matrix& values() const noexcept { return values_; }

  /// The class unit j serves, if any.
  std::optional<int> matched_class(int unit) const {
    const int c = matched_.at(static_cast<std::size_t>(unit));
    return c >= 0 ? std::optional<int>(c) : std::nullopt;
  }

  /// max_{i1,i2} (v_{i1,j} - v_{i2,j}), which is max_i v_{i,j} here.
  double spread(int unit) const { return values_.col(unit).maxCoeff() - values_.col(unit).minCoeff(); }

  /// (unit, class) pairs with v_{class,unit} > 0, ordered by unit.
  std::vector<std::pair<int, int>> matched_pairs() const {
    std::vector<std::pair<int, int>> out;
    for (int j = 0; j < units(); ++j) {
      if (matched_[j] >= 0) out.emplace_back(j, matched_[j]);
    }
    return out;
  }

  friend bool operator==(const SecondLayer& a, const SecondLayer& b) {
    return a.values_ == b.values_;
  }

 private:
  Matrix values_;
  std::vector<int> matched_;
};

/// Block assignment: unit j serves class floor(j * n / k) with weight `value`.
inline SecondLayer make_second_layer(int classes, int units, double value) {
  if (classes < 1) throw ConfigError("need at least one class");
  if (units < classes) {
    throw ConfigError("need at least as many hidden units as classes (k=" +
                      std::to_string(units) + ", n=" + std::to_string(classes) + ")");
  }
  if (!(value > 0.0 && value < 1.0)) {
    throw ConfigError("second-layer value must lie in (0, 1)");
  }
  Matrix v = Matrix::Zero(classes, units);
  for (int j = 0; j < units; ++j) {
    const long long cls = static_cast<long long>(j) * classes / units;
    v(static_cast<Eigen::Index>(cls), j) = value;
  }
  return SecondLayer(std::move(v));
}

class Network {
 public:
  Network(Matrix weights, SecondLayer second_layer, Quantizer quantizer)
      : weights_(std::move(weights)),
        second_(std::move(second_layer)),
        quantizer_(quantizer) {
    if (weights_.cols() != second_.units()) {
      throw ConfigError("hidden weight matrix has " + std::to_string(weights_.cols()) +
                        " columns but the second layer has " +
                        std::to_string(second_.units()) + " units");
    }
    if (weights_.rows() < 1) throw ConfigError("input dimension must be positive");
    if (!weights_.allFinite()) throw ConfigError("hidden weights must be finite");
  }

  int input_dim() const noexcept { return static_cast<int>(weights_.rows()); }
  int units() const noexcept { return static_cast<int>(weights_.cols()); }
  int classes() const noexcept { return second_.classes(); }

  const Matrix& weights() const noexcept { return weights_; }
  const SecondLayer& second_layer() const noexcept { return second_; }
  const Quantizer& quantizer() const noexcept { return quantizer_; }

  Network with_weights(Matrix w) const { return Network(std::move(w), second_, quantizer_); }

  // Sum of hidden-unit column norms, sum_j |w_j|.
  double weight_norm() const {
    double s = 0.0;
    for (Eigen::Index j = 0; j < weights_.cols(); ++j) s += weights_.col(j).norm();
    return s;
  }

 private:
  Matrix weights_;
  SecondLayer second_;
  Quantizer quantizer_;
};

struct ForwardResult {
  Vector scores;       // o, length n
  Vector preacts;      // h, length k
  Vector activations;  // sigma(h), length k
};

/// Allocation-free forward pass into a reusable result.
inline void forward_into(const Network& net, const Vector& x, ForwardResult& out) {
  if (x.size() != net.input_dim()) {
    throw ConfigError("input has dimension " + std::to_string(x.size()) +
                      ", network expects " + std::to_string(net.input_dim()));
  }
  const Matrix& w = net.weights();
  const Matrix& v = net.second_layer().values();
  const auto& q = net.quantizer();
  const Eigen::Index k = w.cols();
  const Eigen::Index d = w.rows();
  out.preacts.resize(k);
  out.activations.resize(k);
  out.scores.setZero(v.rows());
  for (Eigen::Index j = 0; j < k; ++j) {
    double h = 0.0;
    for (Eigen::Index r = 0; r < d; ++r) h += w(r, j) * x[r];
    out.preacts[j] = h;
    out.activations[j] = q.apply(h);
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    const double a = out.activations[j];
    if (a == 0.0) continue;
    for (Eigen::Index i = 0; i < v.rows(); ++i) out.scores[i] += v(i, j) * a;
  }
}

inline ForwardResult forward(const Network& net, const Vector& x) {
  ForwardResult out;
  forward_into(net, x, out);
  return out;
}

/// argmax over scores; ties go to the smallest index.
inline int argmax_label(const Vector& scores) {
  int best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = static_cast<int>(i);
  }
  return best;
}

inline int predict(const Network& net, const Vector& x) {
  return argmax_label(forward(net, x).scores);
}

struct HingeResult {
  double loss = 0.0;
  int runner_up = 0;  // xi: highest-scoring wrong class
};

/// Multiclass hinge loss max{0, 1 - (o_y - max_{i != y} o_i)} from scores.
inline HingeResult hinge_from_scores(const Vector& scores, int label) {
  if (scores.size() < 2) {
    throw ConfigError("hinge loss needs at least two classes");
  }
  if (label < 0 || label >= scores.size()) {
    throw ConfigError("label " + std::to_string(label) + " out of range");
  }
  int xi = label == 0 ? 1 : 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (i != label && scores[i] > scores[xi]) xi = static_cast<int>(i);
  }
  return {std::max(0.0, 1.0 - (scores[label] - scores[xi])), xi};
}

inline HingeResult hinge_loss(const Network& net, const Sample& s) {
  return hinge_from_scores(forward(net, s.x).scores, s.y);
}

struct LossSummary {
  double mean = 0.0;
  // Mean loss over the samples of each class (0 for classes with no samples).
  std::vector<double> class_means;
  double accuracy = 0.0;  // percent
};

/// Empirical population loss over a finite dataset.
///
/// Sums are formed per fixed-size block and combined in block order, so the
/// result is bit-identical for any worker count.
inline LossSummary population_loss(const Network& net, const Dataset& data,
                                   unsigned workers = 1) {
  if (data.empty()) throw ConfigError("population loss of an empty dataset");
  const std::size_t n = static_cast<std::size_t>(net.classes());
  struct Partial {
    std::vector<double> class_sum;
    std::vector<std::size_t> class_count;
    std::size_t correct = 0;
  };
  std::vector<Partial> partials(block_count(data.size()));
  for_each_block(data.size(), workers, [&](std::size_t b, std::size_t begin, std::size_t end) {
    Partial p{std::vector<double>(n, 0.0), std::vector<std::size_t>(n, 0), 0};
    ForwardResult fr;
    for (std::size_t s = begin; s < end; ++s) {
      const Sample& sample = data.samples[s];
      forward_into(net, sample.x, fr);
      const auto h = hinge_from_scores(fr.scores, sample.y);
      p.class_sum[static_cast<std::size_t>(sample.y)] += h.loss;
      ++p.class_count[static_cast<std::size_t>(sample.y)];
      if (argmax_label(fr.scores) == sample.y) ++p.correct;
    }
    partials[b] = std::move(p);
  });

  std::vector<double> class_sum(n, 0.0);
  std::vector<std::size_t> class_count(n, 0);
  std::size_t correct = 0;
  for (const auto& p : partials) {
    for (std::size_t i = 0; i < n; ++i) {
      class_sum[i] += p.class_sum[i];
      class_count[i] += p.class_count[i];
    }
    correct += p.correct;
  }
  LossSummary out;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += class_sum[i];
    out.class_means.push_back(class_count[i] ? class_sum[i] / static_cast<double>(class_count[i]) : 0.0);
  }
  out.mean = total / static_cast<double>(data.size());
  out.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
  return out;
}

}  // namespace stecgd
