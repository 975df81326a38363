#include <cmath>

#include <gtest/gtest.h>

#include "dcal/errors.hpp"
#include "dcal/synth.hpp"

using namespace dcal;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd v1(double a) { return VectorXd::Constant(1, a); }

}  // namespace

TEST(PiecewiseLoss, KinkedValues) {
  const Kernel k = Kernel::min();
  const LossFunction l = make_piecewise_linear_loss(k, v1(1.0), v1(0.0), v1(0.5), 2.0);
  EXPECT_NEAR(l(0, v1(0.25)), 0.25, 1e-15);
  EXPECT_NEAR(l(0, v1(0.75)), 0.5, 1e-15);
  EXPECT_NEAR(l(0, v1(1.0)), 0.5, 1e-15);
}

TEST(PiecewiseLoss, EqualSlopesIsIdentity) {
  const Kernel k = Kernel::min();
  const LossFunction l = make_piecewise_linear_loss(k, v1(1.0), v1(1.0), v1(0.3), 2.0);
  for (double y : {0.0, 0.1, 0.3, 0.6, 1.0}) EXPECT_NEAR(l(0, v1(y)), y, 1e-15);
}

TEST(PiecewiseLoss, MultipleActions) {
  const Kernel k = Kernel::min();
  VectorXd k1(2), k2(2), c(2);
  k1 << 0.5, -0.5;
  k2 << -0.25, 0.75;
  c << 0.2, 0.7;
  const LossFunction l = make_piecewise_linear_loss(k, k1, k2, c, 5.0);
  for (double y : {0.05, 0.4, 0.9})
    for (int a = 0; a < 2; ++a) {
      const double want = y < c(a) ? k1(a) * y : k2(a) * y + (k1(a) - k2(a)) * c(a);
      EXPECT_NEAR(l(a, v1(y)), want, 1e-15);
    }
}

TEST(CobbDouglasLoss, Values) {
  const Kernel k = Kernel::exp(2, 2.0);
  MatrixXd alpha(2, 1);
  alpha << 1.0, 0.0;
  const LossFunction pos = make_cobb_douglas_loss(k, alpha, 1.0, 2.0);
  const LossFunction neg = make_cobb_douglas_loss(k, alpha, -1.0, 2.0);
  EXPECT_NEAR(pos(0, VectorXd::Zero(2)), 1.0, 1e-15);
  EXPECT_NEAR(neg(0, VectorXd::Zero(2)), -1.0, 1e-15);
  const Kernel wide = Kernel::exp(2, std::exp(13.0));
  const LossFunction wpos = make_cobb_douglas_loss(wide, alpha, 1.0, 2.0);
  const LossFunction wneg = make_cobb_douglas_loss(wide, alpha, -1.0, 2.0);
  VectorXd y(2);
  y << std::log(2.0), 5.0;
  EXPECT_NEAR(wpos(0, y), 2.0, 1e-12);
  EXPECT_NEAR(wneg(0, y), -2.0, 1e-12);
  // ||phi(alpha)||^2 = e^{|alpha|^2} <= e on the simplex
  for (double t : {0.0, 0.3, 0.5, 1.0}) {
    MatrixXd a(2, 1);
    a << t, 1.0 - t;
    const LossFunction l = make_cobb_douglas_loss(k, a, 1.0, 2.0);
    EXPECT_LE(norm(l.coefficient(0)), std::sqrt(std::exp(1.0)) + 1e-12);
  }
}

TEST(World, Deterministic) {
  const WorldSpec spec{WorldKind::Planted, 4, 6, 0.4, 0.2, 17};
  const FiniteWorld a = make_world(Kernel::min(), spec), b = make_world(Kernel::min(), spec);
  EXPECT_EQ(a.support, b.support);
  EXPECT_EQ(a.truth, b.truth);
  Rng r1(3), r2(3);
  const Batch x = a.sample(50, r1), y = b.sample(50, r2);
  EXPECT_EQ(x.x, y.x);
  EXPECT_EQ(x.y, y.y);
}

TEST(World, ConditionalsAreDistributions) {
  const FiniteWorld w = make_world(Kernel::linear(3, 1.0), WorldSpec{WorldKind::Noisy, 5, 7, 0.0, 0.3, 2});
  EXPECT_EQ(w.truth.rows(), 7);
  EXPECT_EQ(w.truth.cols(), 5);
  EXPECT_GE(w.truth.minCoeff(), 0.0);
  for (Eigen::Index c = 0; c < 5; ++c) EXPECT_NEAR(w.truth.col(c).sum(), 1.0, 1e-12);
  for (Eigen::Index j = 0; j < w.support.cols(); ++j) EXPECT_TRUE(w.kernel.contains(w.support.col(j)));
}

TEST(World, PlantedShiftHasRequestedNorm) {
  for (const Kernel& k : {Kernel::min(), Kernel::linear(2, 1.0), Kernel::exp(2, 2.0)}) {
    const FiniteWorld w = make_world(k, WorldSpec{WorldKind::Planted, 4, 8, 0.35, 0.2, 5});
    EXPECT_NEAR(norm(w.shift), 0.35, 1e-9);
    // truth minus planted is the shift in every context
    const Predictor t = truth_predictor(w), p = planted_predictor(w);
    for (Eigen::Index c = 0; c < 4; ++c) {
      const VectorXd x = VectorXd::Unit(4, c);
      EXPECT_NEAR(norm(t.evaluate(x) - p.evaluate(x) - w.shift), 0.0, 1e-7);
    }
  }
}

TEST(World, MinSupportIncludesEndpoints) {
  Rng rng(1);
  const MatrixXd s = make_support(Kernel::min(), 6, rng);
  EXPECT_DOUBLE_EQ(s.minCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(s.maxCoeff(), 1.0);
}

TEST(LowerBound, D2NoiseFollowsSigma) {
  Rng rng(4);
  VectorXd sigma = VectorXd::Constant(9, 1.0 / 3.0);
  sigma(2) = -1.0 / 3.0;
  const auto inst = gen_lower_bound(9, 0.1, 30, LowerBoundWorld::D2, rng, sigma);
  EXPECT_EQ(inst.sigma, sigma);
  for (Eigen::Index i = 0; i < inst.n(); ++i) {
    const VectorXd diff = inst.outcomes.col(i) - inst.predictions.col(i);
    EXPECT_NEAR(diff.norm(), 0.1, 1e-15);
    EXPECT_NEAR(diff(0), sigma(inst.index[i]) > 0 ? 0.1 : -0.1, 1e-15);
  }
  EXPECT_TRUE(collision_accepts(inst));
  EXPECT_THROW(gen_lower_bound(9, 0.4, 30, LowerBoundWorld::D2, rng), InvalidInput);
}

TEST(LowerBound, PredictionsAreHalfVertices) {
  Rng rng(5);
  const auto inst = gen_lower_bound(6, 0.1, 40, LowerBoundWorld::D1, rng);
  for (Eigen::Index i = 0; i < inst.n(); ++i) {
    EXPECT_DOUBLE_EQ(inst.predictions.col(i).sum(), 0.5);
    EXPECT_DOUBLE_EQ(inst.predictions(inst.index[i], i), 0.5);
  }
}

TEST(LowerBound, CollisionDetectsDiscordantSigns) {
  Rng rng(6);
  auto inst = gen_lower_bound(4, 0.1, 2, LowerBoundWorld::D1, rng);
  inst.index = {1, 1};
  inst.predictions = MatrixXd::Zero(4, 2);
  inst.predictions(1, 0) = inst.predictions(1, 1) = 0.5;
  inst.outcomes = inst.predictions;
  inst.outcomes(0, 0) += 0.05;
  inst.outcomes(0, 1) -= 0.05;
  EXPECT_FALSE(collision_accepts(inst));
  inst.outcomes.col(1) = inst.outcomes.col(0);
  EXPECT_TRUE(collision_accepts(inst));
}

TEST(DecceLinearBinary, SideSplit) {
  MatrixXd p(2, 2), y(2, 2), r(2, 1);
  p << 0.5, 0.0, 0.0, 0.5;
  y = p.array() + 0.1;
  r << 1.0, 1.0;
  EXPECT_NEAR(decce_linear_binary(p, y, r), std::sqrt(0.02), 1e-15);
  r << 1.0, -1.0;
  // one sample per side
  EXPECT_NEAR(decce_linear_binary(p, y, r), std::sqrt(0.02), 1e-15);
  y.col(1) = p.col(1) - VectorXd::Constant(2, 0.1);
  EXPECT_NEAR(decce_linear_binary(p, y, r), std::sqrt(0.02), 1e-15);
  r << 1.0, 1.0;
  EXPECT_NEAR(decce_linear_binary(p, y, r), 0.0, 1e-15);
  EXPECT_NEAR(decce_linear_binary(p, p, r), 0.0, 1e-15);
}

TEST(RGrid, ShattersSmallDimensions) {
  Rng rng(7);
  for (Eigen::Index d : {1, 2, 5, 8}) {
    const MatrixXd g = default_r_grid(d, rng);
    EXPECT_EQ(g.cols(), Eigen::Index(1) << d);
    EXPECT_TRUE(shatters_vertices(d, g));
  }
  EXPECT_FALSE(shatters_vertices(3, MatrixXd::Ones(3, 1)));
}
