#pragma once

// Coarse gradient: the chain rule through the quantized activation with the
// surrogate slope g'(h_j) standing in for sigma'(h_j), which is zero almost
// everywhere. Per sample and hidden unit j:
//
//   grad_{w_j} = -(v_{y,j} - v_{xi,j}) * 1{hinge loss > 0} * g'(h_j) * x
//
// and coarse gradient descent iterates W <- W - eta * mean(grad).

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "stecgd/dataset.hpp"
#include "stecgd/decomposition.hpp"
#include "stecgd/errors.hpp"
#include "stecgd/network.hpp"
#include "stecgd/parallel.hpp"
#include "stecgd/quantization.hpp"

namespace stecgd {

/// d x k matrix whose column j is the coarse partial derivative w.r.t. w_j.
struct CoarseGradient {
  Matrix columns;

  static CoarseGradient zero(int d, int k) { return {Matrix::Zero(d, k)}; }
  double norm() const { return columns.norm(); }
  bool is_zero() const { return (columns.array() == 0.0).all(); }
};

namespace detail {

// Adds one sample's coarse gradient into `acc`; returns its hinge loss.
inline HingeResult accumulate_sample(const Network& net, const Sample& s, const SteSpec& ste,
                                     ForwardResult& fr, Matrix& acc) {
  forward_into(net, s.x, fr);
  const HingeResult hinge = hinge_from_scores(fr.scores, s.y);
  if (hinge.loss <= 0.0) return hinge;
  const Matrix& v = net.second_layer().values();
  const Eigen::Index d = acc.rows();
  for (Eigen::Index j = 0; j < acc.cols(); ++j) {
    const double coef = v(s.y, j) - v(hinge.runner_up, j);
    if (coef == 0.0) continue;
    const double slope = ste_slope(ste, fr.preacts[j]);
    if (slope == 0.0) continue;
    const double scale = -coef * slope;
    for (Eigen::Index r = 0; r < d; ++r) acc(r, j) += scale * s.x[r];
  }
  return hinge;
}

}  // namespace detail

inline CoarseGradient sample_coarse_grad(const Network& net, const Sample& s, const SteSpec& ste) {
  auto g = CoarseGradient::zero(net.input_dim(), net.units());
  ForwardResult fr;
  detail::accumulate_sample(net, s, ste, fr, g.columns);
  return g;
}

/// Everything one full pass over the data produces.
struct BatchEvaluation {
  double loss = 0.0;
  std::vector<double> class_loss;  // mean hinge loss per class (l_i)
  double accuracy = 0.0;           // percent
  CoarseGradient gradient;         // mean over all samples
  // Mean over the samples of class i only: the coarse gradient of l_i.
  std::vector<CoarseGradient> class_gradients;
};

/// One pass over `count` samples fetched through `sample_at(s)`.
///
/// Per-class sums are formed per fixed block and combined in block order, so
/// results are bit-identical for any worker count.
template <typename SampleAt>
BatchEvaluation evaluate_samples(const Network& net, std::size_t count, SampleAt&& sample_at,
                                 const SteSpec& ste, unsigned workers = 1) {
  if (count == 0) throw ConfigError("coarse gradient of an empty dataset");
  const int n = net.classes();
  const int d = net.input_dim();
  const int k = net.units();

  struct Partial {
    std::vector<Matrix> grad;
    std::vector<double> loss;
    std::vector<std::size_t> count;
    std::size_t correct = 0;
  };
  std::vector<Partial> partials(block_count(count));
  for_each_block(count, workers, [&](std::size_t b, std::size_t begin, std::size_t end) {
    Partial p;
    p.grad.assign(static_cast<std::size_t>(n), Matrix::Zero(d, k));
    p.loss.assign(static_cast<std::size_t>(n), 0.0);
    p.count.assign(static_cast<std::size_t>(n), 0);
    ForwardResult fr;
    for (std::size_t s = begin; s < end; ++s) {
      const Sample& sample = sample_at(s);
      const auto cls = static_cast<std::size_t>(sample.y);
      if (sample.y < 0 || sample.y >= n) throw ConfigError("sample label out of range");
      const HingeResult h = detail::accumulate_sample(net, sample, ste, fr, p.grad[cls]);
      p.loss[cls] += h.loss;
      ++p.count[cls];
      if (argmax_label(fr.scores) == sample.y) ++p.correct;
    }
    partials[b] = std::move(p);
  });

  std::vector<Matrix> grad(static_cast<std::size_t>(n), Matrix::Zero(d, k));
  std::vector<double> loss(static_cast<std::size_t>(n), 0.0);
  std::vector<std::size_t> per_class(static_cast<std::size_t>(n), 0);
  std::size_t correct = 0;
  for (const auto& p : partials) {
    for (std::size_t i = 0; i < grad.size(); ++i) {
      grad[i] += p.grad[i];
      loss[i] += p.loss[i];
      per_class[i] += p.count[i];
    }
    correct += p.correct;
  }

  BatchEvaluation out;
  out.gradient = CoarseGradient::zero(d, k);
  double total_loss = 0.0;
  const double total = static_cast<double>(count);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    out.gradient.columns += grad[i];
    total_loss += loss[i];
    const double c = static_cast<double>(per_class[i]);
    out.class_loss.push_back(per_class[i] ? loss[i] / c : 0.0);
    out.class_gradients.push_back({per_class[i] ? Matrix(grad[i] / c) : Matrix::Zero(d, k)});
  }
  out.gradient.columns /= total;
  out.loss = total_loss / total;
  out.accuracy = 100.0 * static_cast<double>(correct) / total;
  return out;
}

inline BatchEvaluation evaluate_batch(const Network& net, const Dataset& data, const SteSpec& ste,
                                      unsigned workers = 1) {
  return evaluate_samples(
      net, data.size(), [&](std::size_t s) -> const Sample& { return data.samples[s]; }, ste,
      workers);
}

/// Uniform average of the per-sample coarse gradients.
inline CoarseGradient batch_coarse_grad(const Network& net, const Dataset& data,
                                        const SteSpec& ste, unsigned workers = 1) {
  return evaluate_batch(net, data, ste, workers).gradient;
}

struct TrainConfig {
  double eta = 1.0;
  long max_iters = 20000;
  double momentum = 0.0;
  double tol_grad = 1e-8;
  std::uint64_t seed = 1;
  double init_scale = 1.0;
  long log_every = 1;
  // 0 selects full-batch descent. Mini-batches sample without replacement
  // within an epoch; this mode lies outside the convergence theory.
  std::size_t batch_size = 0;
  // Step decay: eta is multiplied by lr_decay_factor at each listed epoch.
  double lr_decay_factor = 1.0;
  std::vector<long> lr_decay_epochs;
  // Forces log_every = 1 so lemma checks can run on the trace.
  bool certify = false;
  unsigned workers = 1;

  void validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be positive");
    if (max_iters < 0) throw ConfigError("max_iters must be non-negative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(tol_grad >= 0.0)) throw ConfigError("tol_grad must be non-negative");
    if (!(init_scale > 0.0) || !std::isfinite(init_scale)) {
      throw ConfigError("init_scale must be positive");
    }
    if (log_every < 1) throw ConfigError("log_every must be positive");
    if (!(lr_decay_factor > 0.0)) throw ConfigError("lr_decay_factor must be positive");
  }

  double eta_at_epoch(long epoch) const {
    double e = eta;
    for (long m : lr_decay_epochs) {
      if (epoch >= m) e *= lr_decay_factor;
    }
    return e;
  }
};

struct StepResult {
  Matrix weights;
  Matrix velocity;
};

/// Heavy-ball step: velocity <- momentum * velocity + grad; W <- W - eta * velocity.
/// With momentum 0 this is exactly W - eta * grad.
inline StepResult cgd_step(const Matrix& weights, const CoarseGradient& grad, double eta,
                           double momentum, const Matrix& velocity) {
  if (grad.columns.rows() != weights.rows() || grad.columns.cols() != weights.cols() ||
      velocity.rows() != weights.rows() || velocity.cols() != weights.cols()) {
    throw ConfigError("cgd_step: shape mismatch");
  }
  StepResult out;
  out.velocity = momentum == 0.0 ? grad.columns : Matrix(momentum * velocity + grad.columns);
  out.weights = weights - eta * out.velocity;
  return out;
}

inline StepResult cgd_step(const Network& net, const CoarseGradient& grad, const TrainConfig& cfg,
                           const Matrix& velocity) {
  return cgd_step(net.weights(), grad, cfg.eta, cfg.momentum, velocity);
}

inline constexpr double kInitProjectionFloor = 1e-8;
inline constexpr int kInitRedrawBudget = 100;

/// Uniform[-scale, scale] entries, column by column. When projectors are given
/// every column must have a projection of norm >= 1e-8 on every class
/// subspace; offending columns are re-drawn (at most 100 re-draws in total).
inline Matrix init_weights(int d, int k, std::uint64_t seed, double scale,
                           const SubspaceProjectors* projectors) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-scale, scale);
  Matrix w(d, k);
  int redraws = 0;
  for (int j = 0; j < k; ++j) {
    while (true) {
      for (int r = 0; r < d; ++r) w(r, j) = unif(rng);
      bool ok = true;
      if (projectors) {
        for (int i = 0; i < projectors->classes() && ok; ++i) {
          ok = projectors->component_norm(w, j, i) >= kInitProjectionFloor;
        }
      }
      if (ok) break;
      if (++redraws > kInitRedrawBudget) {
        throw InitializationError("could not draw hidden unit " + std::to_string(j) +
                                  " with non-zero projections on every class subspace");
      }
    }
  }
  return w;
}

enum class Termination { ZeroLoss, GradTolerance, MaxIters };

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::ZeroLoss:
      return "zero_loss";
    case Termination::GradTolerance:
      return "grad_tolerance";
    case Termination::MaxIters:
      return "max_iters";
  }
  return "unknown";
}

inline Termination parse_termination(std::string_view s) {
  if (s == "zero_loss") return Termination::ZeroLoss;
  if (s == "grad_tolerance") return Termination::GradTolerance;
  if (s == "max_iters") return Termination::MaxIters;
  throw ConfigError("unknown termination reason '" + std::string(s) + "'");
}

struct TraceRecord {
  long t = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double grad_norm = 0.0;  // Frobenius norm of the full-batch coarse gradient
  // |w_{j,i}| for each matched pair (j, i), ordered as TrainTrace::pairs.
  std::vector<double> component_norms;
  // Running sum over s <= t of |grad_{w_j} l_i(W^s)|^2 per matched pair.
  std::vector<double> grad_sq_sum;
  double weight_norm = 0.0;  // sum_j |w_j|
};

struct TrainTrace {
  std::vector<std::pair<int, int>> pairs;  // (unit, class) with v_{class,unit} > 0
  std::vector<TraceRecord> records;
  Termination termination = Termination::MaxIters;
  long iterations = 0;                // steps taken
  std::optional<long> converged_at;   // first t with loss exactly 0
  double max_weight_norm = 0.0;       // max_t sum_j |w_j^t|
};

struct TrainResult {
  Network network;
  TrainTrace trace;
  BatchEvaluation final_eval;
};

/// Coarse gradient descent until the population loss is exactly zero, the
/// coarse gradient norm drops to tol_grad, or max_iters steps were taken.
inline TrainResult train(const Network& initial, const Dataset& data, const SteSpec& ste,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw ConfigError("cannot train on an empty dataset");
  if (data.dim() != initial.input_dim()) {
    throw ConfigError("dataset dimension does not match the network input");
  }
  if (data.classes() != initial.classes()) {
    throw ConfigError("dataset class count does not match the network");
  }
  const long log_every = cfg.certify ? 1 : cfg.log_every;

  std::optional<SubspaceProjectors> projectors;
  if (data.spec.has_bases()) projectors.emplace(data.spec);

  TrainTrace trace;
  trace.pairs = initial.second_layer().matched_pairs();
  std::vector<double> grad_sq(trace.pairs.size(), 0.0);

  Network net = initial;
  Matrix velocity = Matrix::Zero(net.input_dim(), net.units());
  std::mt19937_64 batch_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.size());
  for (std::size_t s = 0; s < order.size(); ++s) order[s] = s;
  std::size_t cursor = order.size();
  long epoch = -1;

  BatchEvaluation eval;
  for (long t = 0;; ++t) {
    eval = evaluate_batch(net, data, ste, cfg.workers);
    for (std::size_t p = 0; p < trace.pairs.size(); ++p) {
      const auto [j, i] = trace.pairs[p];
      grad_sq[p] += eval.class_gradients[static_cast<std::size_t>(i)].columns.col(j).squaredNorm();
    }
    const double wnorm = net.weight_norm();
    trace.max_weight_norm = std::max(trace.max_weight_norm, wnorm);
    const double gnorm = eval.gradient.norm();

    std::optional<Termination> stop;
    if (eval.loss == 0.0) {
      stop = Termination::ZeroLoss;
      trace.converged_at = t;
    } else if (gnorm <= cfg.tol_grad) {
      stop = Termination::GradTolerance;
    } else if (t >= cfg.max_iters) {
      stop = Termination::MaxIters;
    }

    if (stop || t % log_every == 0) {
      TraceRecord rec;
      rec.t = t;
      rec.loss = eval.loss;
      rec.accuracy = eval.accuracy;
      rec.grad_norm = gnorm;
      if (projectors) {
        for (const auto& [j, i] : trace.pairs) {
          rec.component_norms.push_back(projectors->component_norm(net.weights(), j, i));
        }
      }
      rec.grad_sq_sum = grad_sq;
      rec.weight_norm = wnorm;
      trace.records.push_back(std::move(rec));
    }
    if (stop) {
      trace.termination = *stop;
      trace.iterations = t;
      break;
    }

    CoarseGradient step_grad;
    if (cfg.batch_size == 0 || cfg.batch_size >= data.size()) {
      epoch = t;
      step_grad = std::move(eval.gradient);
    } else {
      if (cursor + cfg.batch_size > order.size()) {
        std::shuffle(order.begin(), order.end(), batch_rng);
        cursor = 0;
        ++epoch;
      }
      const std::size_t begin = cursor;
      cursor += cfg.batch_size;
      step_grad = evaluate_samples(
                      net, cfg.batch_size,
                      [&](std::size_t s) -> const Sample& { return data.samples[order[begin + s]]; },
                      ste, cfg.workers)
                      .gradient;
    }
    auto next = cgd_step(net.weights(), step_grad, cfg.eta_at_epoch(epoch), cfg.momentum, velocity);
    velocity = std::move(next.velocity);
    net = net.with_weights(std::move(next.weights));
  }
  return {std::move(net), std::move(trace), std::move(eval)};
}

}  // namespace stecgd
