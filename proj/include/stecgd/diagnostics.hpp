#pragma once

// Runtime checks for the convergence argument of coarse gradient descent:
// decoupling of the per-class updates, monotone growth of matched components,
// the region-probability lower bound, and "zero coarse gradient implies zero
// loss".

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stecgd/coarse_grad.hpp"
#include "stecgd/dataset.hpp"
#include "stecgd/decomposition.hpp"
#include "stecgd/network.hpp"
#include "stecgd/quantization.hpp"

namespace stecgd {

enum class CheckStatus { Pass, Fail, NotApplicable, Skipped, Degenerate };

inline std::string_view to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass:
      return "pass";
    case CheckStatus::Fail:
      return "FAIL";
    case CheckStatus::NotApplicable:
      return "not applicable";
    case CheckStatus::Skipped:
      return "skipped";
    case CheckStatus::Degenerate:
      return "degenerate";
  }
  return "unknown";
}

struct LemmaReport {
  std::string name;
  CheckStatus status = CheckStatus::Pass;
  double worst_violation = 0.0;
  long iteration = -1;
  int unit = -1;
  int cls = -1;
  std::string detail;

  bool failed() const noexcept { return status == CheckStatus::Fail; }
};

inline constexpr double kMonotonicityTol = 1e-12;
inline constexpr double kDecouplingTol = 1e-12;
inline constexpr double kRegionBoundSlack = 1e-9;
inline constexpr double kDistinctAngle = 1e-6;

/// |w_{j,i}^{t+1}| >= |w_{j,i}^t| - 1e-12 for every matched pair and every
/// pair of consecutive trace records.
inline LemmaReport check_monotonicity(const TrainTrace& trace, const SecondLayer& v) {
  LemmaReport rep;
  rep.name = "norm_monotonicity";
  const auto pairs = v.matched_pairs();
  for (const auto& rec : trace.records) {
    if (rec.component_norms.size() != pairs.size()) {
      throw DiagnosticUnavailable("trace records carry no component norms for the matched pairs");
    }
  }
  for (std::size_t r = 1; r < trace.records.size(); ++r) {
    const auto& prev = trace.records[r - 1];
    const auto& next = trace.records[r];
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const double drop = prev.component_norms[p] - next.component_norms[p];
      if (drop > rep.worst_violation) {
        rep.worst_violation = drop;
        rep.iteration = next.t;
        rep.unit = pairs[p].first;
        rep.cls = pairs[p].second;
      }
    }
  }
  rep.status = rep.worst_violation <= kMonotonicityTol ? CheckStatus::Pass : CheckStatus::Fail;
  if (trace.records.size() > 1 && trace.records[1].t - trace.records[0].t != 1) {
    rep.detail = "trace is subsampled; certification needs log_every = 1";
  }
  return rep;
}

/// As above, but aware of the data geometry: the lemma assumes mutually
/// orthogonal class subspaces, so on angled data a decrease is reported as
/// "not applicable" (with the measured violation kept) rather than a failure.
inline LemmaReport check_monotonicity(const TrainTrace& trace, const SecondLayer& v,
                                      const SubspaceSpec& spec) {
  LemmaReport rep = check_monotonicity(trace, v);
  if (rep.failed() && !SubspaceProjectors(spec).orthogonal()) {
    rep.status = CheckStatus::NotApplicable;
    rep.detail = "class subspaces are not mutually orthogonal; decrease observed";
  }
  return rep;
}

/// One class-i-only descent step must leave every component on V_r (r != i)
/// and on the complement unchanged. Requires mutually orthogonal subspaces.
inline LemmaReport check_decoupling(const Network& net, const Dataset& data, const SteSpec& ste,
                                    double eta = 1.0) {
  LemmaReport rep;
  rep.name = "decoupling";
  SubspaceProjectors proj(data.spec);
  if (!proj.orthogonal()) {
    rep.status = CheckStatus::NotApplicable;
    rep.detail = "class subspaces are not mutually orthogonal";
    return rep;
  }
  const Matrix& w = net.weights();
  for (int i = 0; i < net.classes(); ++i) {
    const Dataset only = data.restrict_to_class(i);
    if (only.empty()) continue;
    const CoarseGradient g = batch_coarse_grad(net, only, ste);
    const Matrix stepped = cgd_step(w, g, eta, 0.0, Matrix::Zero(w.rows(), w.cols())).weights;
    for (int r = 0; r <= proj.classes(); ++r) {
      if (r == i) continue;
      const Matrix motion = proj.component(stepped, r) - proj.component(w, r);
      for (int j = 0; j < net.units(); ++j) {
        const double m = motion.col(j).norm();
        if (m > rep.worst_violation) {
          rep.worst_violation = m;
          rep.unit = j;
          rep.cls = r;
          rep.detail = "step on class " + std::to_string(i);
        }
      }
    }
  }
  rep.status = rep.worst_violation <= kDecouplingTol ? CheckStatus::Pass : CheckStatus::Fail;
  return rep;
}

/// Empirical frequency of Omega_W^j: samples with positive hinge loss and a
/// positive pre-activation on unit j. Restricted to one class when given.
inline double region_probability(const Network& net, const Dataset& data, int unit,
                                  std::optional<int> cls = std::nullopt) {
  std::size_t hits = 0;
  std::size_t total = 0;
  ForwardResult fr;
  for (const auto& s : data.samples) {
    if (cls && s.y != *cls) continue;
    ++total;
    forward_into(net, s.x, fr);
    if (fr.preacts[unit] > 0.0 && hinge_from_scores(fr.scores, s.y).loss > 0.0) ++hits;
  }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

/// P_i(Omega_W^j) >= |grad_{w_j} l_i| / (vhat_j * delta_tilde * M) for every
/// matched (j, i), with M the data norm bound.
inline LemmaReport check_region_bound(const Network& net, const Dataset& data,
                                      const SteSpec& ste) {
  LemmaReport rep;
  rep.name = "region_probability_bound";
  const double bound = std::max(data.spec.max_norm(), data.observed_max_norm());
  const BatchEvaluation eval = evaluate_batch(net, data, ste);
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& [j, i] : net.second_layer().matched_pairs()) {
    const double lhs = region_probability(net, data, j, i);
    const double g = eval.class_gradients[static_cast<std::size_t>(i)].columns.col(j).norm();
    const double rhs = g / (net.second_layer().spread(j) * ste.delta_tilde * bound);
    const double gap = rhs - lhs;
    if (gap > worst) {
      worst = gap;
      rep.unit = j;
      rep.cls = i;
    }
  }
  rep.worst_violation = std::max(0.0, worst);
  rep.status = worst <= kRegionBoundSlack ? CheckStatus::Pass : CheckStatus::Fail;
  return rep;
}

/// A trained network whose matched class coarse gradients vanish, with
/// pairwise distinct normalized matched components, has zero loss.
inline LemmaReport check_zero_grad_zero_loss(const Network& net, const Dataset& data,
                                             const SteSpec& ste, double tol = 1e-8) {
  LemmaReport rep;
  rep.name = "zero_gradient_zero_loss";
  const BatchEvaluation eval = evaluate_batch(net, data, ste);
  const auto pairs = net.second_layer().matched_pairs();
  for (const auto& [j, i] : pairs) {
    const double g = eval.class_gradients[static_cast<std::size_t>(i)].columns.col(j).norm();
    if (g > tol) {
      rep.status = CheckStatus::Skipped;
      rep.unit = j;
      rep.cls = i;
      rep.detail = "coarse gradient has not vanished (precondition unmet)";
      return rep;
    }
  }

  SubspaceProjectors proj(data.spec);
  std::vector<Vector> dirs;
  std::vector<std::pair<int, int>> owners;
  for (const auto& [j, i] : pairs) {
    Vector c = proj.projector(i) * net.weights().col(j);
    const double n = c.norm();
    if (n > 1e-12) {
      dirs.push_back(c / n);
      owners.emplace_back(j, i);
    }
  }
  for (std::size_t a = 0; a < dirs.size(); ++a) {
    for (std::size_t b = a + 1; b < dirs.size(); ++b) {
      // Chord-based angle stays accurate for nearly equal unit vectors.
      const double angle = 2.0 * std::asin(std::min(1.0, (dirs[a] - dirs[b]).norm() / 2.0));
      if (angle <= kDistinctAngle) {
        rep.status = CheckStatus::Degenerate;
        rep.unit = owners[b].first;
        rep.cls = owners[b].second;
        rep.detail = "normalized components of units " + std::to_string(owners[a].first) +
                     " and " + std::to_string(owners[b].first) +
                     " coincide (hypothesis unmet)";
        return rep;
      }
    }
  }
  rep.worst_violation = eval.loss;
  rep.status = eval.loss == 0.0 && eval.accuracy == 100.0 ? CheckStatus::Pass : CheckStatus::Fail;
  if (rep.failed()) {
    rep.detail = "loss " + std::to_string(eval.loss) + ", accuracy " +
                 std::to_string(eval.accuracy) + "%";
  }
  return rep;
}

/// Empirical constant in "increment of |w_{j,i}| >= c * |grad_{w_j} l_i|^2".
struct IncrementBound {
  // min over steps with a non-zero class gradient of increment / |grad|^2.
  double min_ratio = std::numeric_limits<double>::infinity();
  // Steps where the class gradient was non-zero but the norm did not grow.
  std::size_t non_positive = 0;
  std::size_t samples = 0;
};

/// Requires a trace logged at every iteration.
inline IncrementBound increment_bound(const TrainTrace& trace) {
  IncrementBound out;
  const auto& recs = trace.records;
  for (std::size_t r = 0; r + 1 < recs.size(); ++r) {
    if (recs[r + 1].t != recs[r].t + 1) {
      throw DiagnosticUnavailable("increment bound needs a trace logged at every iteration");
    }
    for (std::size_t p = 0; p < recs[r].grad_sq_sum.size(); ++p) {
      const double before = r == 0 ? 0.0 : recs[r - 1].grad_sq_sum[p];
      const double g2 = recs[r].grad_sq_sum[p] - before;
      if (!(g2 > 0.0) || recs[r].component_norms.empty()) continue;
      const double inc = recs[r + 1].component_norms[p] - recs[r].component_norms[p];
      ++out.samples;
      if (inc <= 0.0) ++out.non_positive;
      out.min_ratio = std::min(out.min_ratio, inc / g2);
    }
  }
  return out;
}

}  // namespace stecgd
