#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stecgd/errors.hpp"

namespace stecgd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Labeled input. Labels are zero-based class indices.
struct Sample {
  Vector x;
  int y = 0;
};

enum class SubspaceLayout {
  // Two classes in R^4; class 0 spans {e1, sin(t) e2 + cos(t) e3}, class 1
  // spans {e3, e4}.
  AngledPair,
  // n classes on disjoint coordinate planes of R^{2n}.
  Orthogonal,
  // Ingested data without subspace metadata.
  Unknown,
};

/// Where the samples live and how the planar grids were laid out.
struct SubspaceSpec {
  SubspaceLayout layout = SubspaceLayout::AngledPair;
  int ambient_dim = 4;
  int classes = 2;
  double theta = std::numbers::pi / 2;
  // Column-orthonormal d x 2 basis per class. Empty for Unknown layout.
  std::vector<Matrix> bases;
  std::vector<double> radii;
  std::vector<double> angles;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  bool has_bases() const { return !bases.empty(); }

  // Largest admissible sample norm (data bound M).
  double max_norm() const {
    double r = 0.0;
    for (double v : radii) r = std::max(r, v);
    return r + 3.0 * noise_sigma * std::sqrt(static_cast<double>(ambient_dim));
  }
  // Smallest admissible sample norm (data bound m).
  double min_norm() const {
    if (radii.empty()) return 0.0;
    double r = radii.front();
    for (double v : radii) r = std::min(r, v);
    return std::max(0.0, r - 3.0 * noise_sigma * std::sqrt(static_cast<double>(ambient_dim)));
  }
};

struct Dataset {
  std::vector<Sample> samples;
  SubspaceSpec spec;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  int dim() const { return spec.ambient_dim; }
  int classes() const { return spec.classes; }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(spec.classes), 0);
    for (const auto& s : samples) ++counts.at(static_cast<std::size_t>(s.y));
    return counts;
  }

  bool balanced() const {
    const auto counts = class_counts();
    for (auto c : counts) {
      if (c != counts.front()) return false;
    }
    return true;
  }

  // Largest sample norm actually present.
  double observed_max_norm() const {
    double m = 0.0;
    for (const auto& s : samples) m = std::max(m, s.x.norm());
    return m;
  }

  /// Samples of one class, in dataset order.
  Dataset restrict_to_class(int label) const {
    Dataset out;
    out.spec = spec;
    for (const auto& s : samples) {
      if (s.y == label) out.samples.push_back(s);
    }
    return out;
  }
};

}  // namespace stecgd
