#pragma once

// Splits hidden weights along the class subspaces:
//   R^d = V_1 (+) ... (+) V_n (+) V_{n+1},  w_j = sum_i w_{j,i},
// where V_{n+1} is the orthogonal complement of V_1 + ... + V_n.

#include <cmath>
#include <string>
#include <vector>

#include "stecgd/dataset.hpp"
#include "stecgd/errors.hpp"

namespace stecgd {

/// Projectors onto each class subspace plus the complement (last entry).
///
/// With mutually orthogonal class bases these are orthogonal projectors. When
/// the class subspaces are only linearly independent the class projectors are
/// oblique: they come from solving the stacked-basis least-squares system.
class SubspaceProjectors {
 public:
  static constexpr double kOrthonormalTol = 1e-8;
  static constexpr double kOrthogonalTol = 1e-12;

  explicit SubspaceProjectors(const std::vector<Matrix>& bases) {
    if (bases.empty()) throw ConfigError("decomposition needs at least one class basis");
    const Eigen::Index d = bases.front().rows();
    Eigen::Index total = 0;
    for (const auto& b : bases) {
      if (b.rows() != d || b.cols() < 1) {
        throw ConfigError("class bases must share the ambient dimension");
      }
      const Matrix gram = b.transpose() * b;
      const double dev = (gram - Matrix::Identity(b.cols(), b.cols())).cwiseAbs().maxCoeff();
      if (dev > kOrthonormalTol) {
        throw ConfigError("class basis is not orthonormal (Gram deviation " +
                          std::to_string(dev) + ")");
      }
      total += b.cols();
    }
    if (total > d) throw ConfigError("class subspaces do not fit in the ambient space");

    orthogonal_ = true;
    for (std::size_t i = 0; i < bases.size(); ++i) {
      for (std::size_t r = i + 1; r < bases.size(); ++r) {
        const double cross = (bases[i].transpose() * bases[r]).cwiseAbs().maxCoeff();
        if (cross > kOrthogonalTol) orthogonal_ = false;
      }
    }

    Matrix sum = Matrix::Zero(d, d);
    if (orthogonal_) {
      for (const auto& b : bases) {
        projectors_.push_back(b * b.transpose());
        sum += projectors_.back();
      }
    } else {
      Matrix stacked(d, total);
      Eigen::Index col = 0;
      for (const auto& b : bases) {
        stacked.middleCols(col, b.cols()) = b;
        col += b.cols();
      }
      const Matrix gram = stacked.transpose() * stacked;
      Eigen::FullPivLU<Matrix> lu(gram);
      if (lu.rank() < total) {
        throw ConfigError("class subspaces are not linearly independent");
      }
      // Coefficients of the least-squares fit, c = (B^T B)^{-1} B^T w.
      const Matrix coeff = lu.solve(stacked.transpose());
      col = 0;
      for (const auto& b : bases) {
        projectors_.push_back(b * coeff.middleRows(col, b.cols()));
        sum += projectors_.back();
        col += b.cols();
      }
    }
    projectors_.push_back(Matrix::Identity(d, d) - sum);
  }

  explicit SubspaceProjectors(const SubspaceSpec& spec)
      : SubspaceProjectors(require_bases(spec)) {}

  /// Number of class subspaces n; the complement is index n.
  int classes() const noexcept { return static_cast<int>(projectors_.size()) - 1; }
  bool orthogonal() const noexcept { return orthogonal_; }
  const Matrix& projector(int i) const { return projectors_.at(static_cast<std::size_t>(i)); }
  const Matrix& complement() const { return projectors_.back(); }

  /// W_i = P_i W: the i-th component of every column at once.
  Matrix component(const Matrix& weights, int i) const { return projector(i) * weights; }

  double component_norm(const Matrix& weights, int unit, int i) const {
    return (projector(i) * weights.col(unit)).norm();
  }

 private:
  static const std::vector<Matrix>& require_bases(const SubspaceSpec& spec) {
    if (!spec.has_bases()) {
      throw DiagnosticUnavailable("dataset carries no subspace bases");
    }
    return spec.bases;
  }

  std::vector<Matrix> projectors_;
  bool orthogonal_ = true;
};

/// Per-subspace components of a weight matrix.
struct Decomposition {
  SubspaceProjectors projectors;
  // components[i] = W_i (d x k); index n is the complement V_{n+1}.
  std::vector<Matrix> components;

  Vector component(int unit, int i) const {
    return components.at(static_cast<std::size_t>(i)).col(unit);
  }
};

inline Decomposition decompose(const SubspaceSpec& spec, const Matrix& weights) {
  SubspaceProjectors p(spec);
  if (p.projector(0).rows() != weights.rows()) {
    throw ConfigError("weight rows do not match the subspace ambient dimension");
  }
  std::vector<Matrix> parts;
  for (int i = 0; i <= p.classes(); ++i) parts.push_back(p.component(weights, i));
  return {std::move(p), std::move(parts)};
}

}  // namespace stecgd
