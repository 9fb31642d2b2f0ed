#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "stecgd/diagnostics.hpp"
#include "stecgd/subspace_data.hpp"
#include "test_support.hpp"

namespace stecgd {
namespace {

constexpr double kPi = std::numbers::pi;

TEST(Projectors, OrthogonalCaseRecoversCoordinates) {
  const auto spec = make_angled_pair(kPi / 2);
  std::mt19937_64 rng(61);
  const Matrix w = testing::random_matrix(4, 24, rng, 2.0);
  const auto dec = decompose(spec, w);
  ASSERT_EQ(dec.components.size(), 3u);
  for (int j = 0; j < 24; ++j) {
    const Vector c0 = dec.component(j, 0), c1 = dec.component(j, 1);
    EXPECT_EQ(c0[0], w(0, j));
    EXPECT_EQ(c0[1], w(1, j));
    EXPECT_EQ(c0[2], 0.0);
    EXPECT_EQ(c1[2], w(2, j));
    EXPECT_EQ(c1[3], w(3, j));
    EXPECT_EQ(c1[0], 0.0);
    EXPECT_TRUE(dec.component(j, 2).isZero(0));
    EXPECT_NEAR(c0.squaredNorm() + c1.squaredNorm(), w.col(j).squaredNorm(), 1e-12);
  }
}

TEST(Projectors, VectorInsideSubspaceIsItsOwnComponent) {
  for (double theta : {kPi / 8, kPi / 2}) {
    const auto spec = make_angled_pair(theta);
    const Matrix w = spec.bases[0] * Vector::Ones(2);
    const auto dec = decompose(spec, w);
    EXPECT_LE((dec.component(0, 0) - w.col(0)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE(dec.component(0, 1).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE(dec.component(0, 2).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Projectors, CompletenessAndIdempotence) {
  std::mt19937_64 rng(67);
  std::vector<SubspaceSpec> specs;
  for (int m = 1; m <= 8; ++m) specs.push_back(make_angled_pair(m * kPi / 16));
  specs.push_back(make_orthogonal(3));
  for (const auto& spec : specs) {
    const SubspaceProjectors p(spec);
    const int d = spec.ambient_dim;
    Matrix sum = Matrix::Zero(d, d);
    for (int i = 0; i <= p.classes(); ++i) {
      sum += p.projector(i);
      EXPECT_LE((p.projector(i) * p.projector(i) - p.projector(i)).cwiseAbs().maxCoeff(), 1e-12);
    }
    EXPECT_LE((sum - Matrix::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-12);
    if (p.orthogonal()) {
      for (int i = 0; i < p.classes(); ++i) {
        for (int r = 0; r <= p.classes(); ++r) {
          if (r == i) continue;
          EXPECT_LE((p.projector(i) * p.projector(r)).cwiseAbs().maxCoeff(), 1e-12);
        }
      }
    }
    const Matrix w = testing::random_matrix(d, 12, rng, 3.0);
    Matrix recon = Matrix::Zero(d, 12);
    for (int i = 0; i <= p.classes(); ++i) recon += p.component(w, i);
    EXPECT_LE((recon - w).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Projectors, RejectsBadBases) {
  EXPECT_THROW(SubspaceProjectors(std::vector<Matrix>{2.0 * Matrix::Identity(4, 2)}), ConfigError);
  const Matrix b = Matrix::Identity(4, 2);
  EXPECT_THROW(SubspaceProjectors(std::vector<Matrix>{b, b}), ConfigError);
  SubspaceSpec bare;
  bare.layout = SubspaceLayout::Unknown;
  EXPECT_THROW(SubspaceProjectors{bare}, DiagnosticUnavailable);
}

TraceRecord record(long t, std::vector<double> norms) {
  TraceRecord r;
  r.t = t;
  r.component_norms = std::move(norms);
  r.grad_sq_sum.assign(r.component_norms.size(), 0.0);
  return r;
}

TEST(Monotonicity, ConstantTracePasses) {
  const auto v = make_second_layer(2, 2, 0.5);
  TrainTrace trace;
  for (long t = 0; t < 5; ++t) trace.records.push_back(record(t, {1.0, 2.0}));
  const auto rep = check_monotonicity(trace, v);
  EXPECT_EQ(rep.status, CheckStatus::Pass);
  EXPECT_EQ(rep.worst_violation, 0.0);
}

TEST(Monotonicity, DecreasingNormFails) {
  const auto v = make_second_layer(2, 2, 0.5);
  TrainTrace trace;
  trace.records = {record(0, {1.0, 2.0}), record(1, {1.5, 2.0}), record(2, {1.5, 1.75})};
  const auto rep = check_monotonicity(trace, v);
  EXPECT_EQ(rep.status, CheckStatus::Fail);
  EXPECT_EQ(rep.worst_violation, 0.25);
  EXPECT_EQ(rep.iteration, 2);
  EXPECT_EQ(rep.unit, 1);
  EXPECT_EQ(rep.cls, 1);
}

TEST(Monotonicity, DecreaseOnAngledDataIsNotApplicable) {
  const auto v = make_second_layer(2, 2, 0.5);
  TrainTrace trace;
  trace.records = {record(0, {1.0, 2.0}), record(1, {0.5, 2.0})};
  const auto angled = check_monotonicity(trace, v, make_angled_pair(kPi / 4));
  EXPECT_EQ(angled.status, CheckStatus::NotApplicable);
  EXPECT_EQ(angled.worst_violation, 0.5);
  EXPECT_EQ(check_monotonicity(trace, v, make_angled_pair(kPi / 2)).status, CheckStatus::Fail);
}

TEST(Monotonicity, MissingNormsUnavailable) {
  TrainTrace trace;
  trace.records = {record(0, {})};
  EXPECT_THROW(check_monotonicity(trace, make_second_layer(2, 2, 0.5)), DiagnosticUnavailable);
}

TEST(Monotonicity, HoldsAlongTrainingForCatalog) {
  const auto spec = make_angled_pair(kPi / 2);
  const auto data = generate(spec);
  const SubspaceProjectors proj(spec);
  for (auto kind : testing::kCatalog) {
    const auto net = testing::default_network(init_weights(4, 24, 11, 1.0, &proj));
    TrainConfig cfg;
    cfg.max_iters = 400;
    cfg.certify = true;
    const auto res = train(net, data, testing::catalog_ste(kind), cfg);
    EXPECT_EQ(check_monotonicity(res.trace, net.second_layer()).status, CheckStatus::Pass)
        << to_string(kind);
    const auto inc = increment_bound(res.trace);
    EXPECT_GT(inc.samples, 0u);
    EXPECT_EQ(inc.non_positive, 0u);
    EXPECT_GT(inc.min_ratio, 0.0);
  }
}

TEST(Decoupling, OrthogonalStepLeavesOtherComponents) {
  const auto data = generate(make_angled_pair(kPi / 2));
  std::mt19937_64 rng(71);
  for (auto kind : testing::kCatalog) {
    const auto net = testing::default_network(testing::random_matrix(4, 24, rng, 2.0));
    const auto rep = check_decoupling(net, data, testing::catalog_ste(kind));
    EXPECT_EQ(rep.status, CheckStatus::Pass);
    EXPECT_LE(rep.worst_violation, kDecouplingTol);
  }
  const auto frozen = check_decoupling(testing::default_network(testing::separating_weights()),
                                       data, SteSpec{});
  EXPECT_EQ(frozen.status, CheckStatus::Pass);
  EXPECT_EQ(frozen.worst_violation, 0.0);
}

TEST(Decoupling, AngledDataNotApplicable) {
  const auto data = generate(make_angled_pair(kPi / 4));
  const auto rep = check_decoupling(testing::default_network(Matrix::Ones(4, 24)), data, SteSpec{});
  EXPECT_EQ(rep.status, CheckStatus::NotApplicable);
  EXPECT_FALSE(rep.failed());
}

TEST(RegionProbability, TrivialCases) {
  const auto data = generate(make_angled_pair(kPi / 2));
  const auto sep = testing::default_network(testing::separating_weights());
  const auto zero = testing::default_network(Matrix::Zero(4, 24));
  for (int j = 0; j < 24; ++j) {
    EXPECT_EQ(region_probability(sep, data, j), 0.0);
    EXPECT_EQ(region_probability(zero, data, j), 0.0);
  }
}

TEST(RegionProbability, BoundHoldsOnRandomWeights) {
  std::mt19937_64 rng(73);
  for (double theta : {kPi / 4, kPi / 2}) {
    const auto data = generate(make_angled_pair(theta, 1, 0.01));
    for (auto kind : testing::kCatalog) {
      const auto ste = testing::catalog_ste(kind);
      for (int trial = 0; trial < 5; ++trial) {
        const auto net = testing::default_network(testing::random_matrix(4, 24, rng, 3.0));
        const auto rep = check_region_bound(net, data, ste);
        EXPECT_EQ(rep.status, CheckStatus::Pass) << to_string(kind) << " gap " << rep.worst_violation;
      }
    }
  }
}

TEST(ZeroGradZeroLoss, Outcomes) {
  const auto data = generate(make_angled_pair(kPi / 2));
  const auto sep = testing::default_network(testing::separating_weights());
  EXPECT_EQ(check_zero_grad_zero_loss(sep, data, SteSpec{}).status, CheckStatus::Pass);

  std::mt19937_64 rng(79);
  const auto raw = testing::default_network(testing::random_matrix(4, 24, rng));
  EXPECT_EQ(check_zero_grad_zero_loss(raw, data, SteSpec{}).status, CheckStatus::Skipped);

  Matrix dup = testing::separating_weights();
  dup.col(1) = dup.col(0);
  const auto rep = check_zero_grad_zero_loss(testing::default_network(dup), data, SteSpec{});
  EXPECT_EQ(rep.status, CheckStatus::Degenerate);
  EXPECT_EQ(rep.unit, 1);
}

TEST(IncrementBound, NeedsEveryIteration) {
  TrainTrace trace;
  trace.records = {record(0, {1.0}), record(5, {2.0})};
  EXPECT_THROW(increment_bound(trace), DiagnosticUnavailable);
}

TEST(CheckStatus, Names) {
  EXPECT_EQ(to_string(CheckStatus::Pass), "pass");
  EXPECT_EQ(to_string(CheckStatus::Fail), "FAIL");
  EXPECT_EQ(to_string(CheckStatus::NotApplicable), "not applicable");
}

}  // namespace
}  // namespace stecgd
