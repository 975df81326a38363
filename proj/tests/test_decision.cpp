#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dcal/decision.hpp"

using namespace dcal;
using Eigen::VectorXd;

TEST(SmoothBestResponse, EqualEstimatesGiveUniform) {
  const VectorXd f = VectorXd::Constant(3, 0.7);
  for (double beta : {0.0, 1.0, 50.0}) {
    const VectorXd k = smooth_best_response(f, beta);
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(k(a), 1.0 / 3.0, 1e-15);
  }
}

TEST(SmoothBestResponse, BetaZeroIsUniform) {
  VectorXd f(4);
  f << 0.1, -3.0, 2.0, 0.5;
  const VectorXd k = smooth_best_response(f, 0.0);
  for (int a = 0; a < 4; ++a) EXPECT_DOUBLE_EQ(k(a), 0.25);
}

TEST(SmoothBestResponse, DirectExponentials) {
  VectorXd f(2);
  f << 0.0, std::log(2.0);
  const VectorXd k = smooth_best_response(f, 1.0);
  EXPECT_NEAR(k(0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(k(1), 1.0 / 3.0, 1e-15);
}

TEST(SmoothBestResponse, StableForLargeBeta) {
  VectorXd f(3);
  f << 1.0, 2.0, 3.0;
  const VectorXd k = smooth_best_response(f, 1e4);
  EXPECT_TRUE(k.allFinite());
  EXPECT_NEAR(k(0), 1.0, 1e-15);
}

TEST(SmoothBestResponse, RejectsBadInput) {
  EXPECT_THROW(smooth_best_response(VectorXd(0), 1.0), InvalidInput);
  EXPECT_THROW(smooth_best_response(VectorXd::Zero(2), -1.0), InvalidInput);
}

TEST(SmoothBestResponse, IsADistribution) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int t = 0; t < 500; ++t) {
    VectorXd f(1 + t % 6);
    for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = g(rng);
    const VectorXd k = smooth_best_response(f, std::abs(g(rng)) * 10.0);
    EXPECT_NEAR(k.sum(), 1.0, 1e-12);
    EXPECT_GE(k.minCoeff(), 0.0);
  }
}

TEST(SmoothBestResponse, SmoothApproximation) {
  // E_k f - min f <= (ln|A| + 1) / beta
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 2000; ++t) {
    VectorXd f(1 + t % 8);
    for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = g(rng);
    const double beta = 0.1 + std::abs(g(rng)) * 20.0;
    const VectorXd k = smooth_best_response(f, beta);
    EXPECT_LE(k.dot(f) - f.minCoeff(),
              (std::log(static_cast<double>(f.size())) + 1.0) / beta + 1e-12);
  }
}

TEST(DeterministicBestResponse, Argmin) {
  VectorXd f(3);
  f << 0.2, 0.1, 0.3;
  EXPECT_EQ(deterministic_best_response(f), 1);  // second action
}

TEST(DeterministicBestResponse, TiesGoToLowestIndex) {
  VectorXd f(2);
  f << 0.5, 0.5;
  EXPECT_EQ(deterministic_best_response(f), 0);
}

TEST(DeterministicBestResponse, TranslationInvariant) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    VectorXd f(5);
    for (int i = 0; i < 5; ++i) f(i) = g(rng);
    const double c = g(rng) * 10.0;
    EXPECT_EQ(deterministic_best_response(f),
              deterministic_best_response(VectorXd(f.array() + c)));
  }
}

TEST(DecisionProbabilities, DeterministicIsOneHot) {
  VectorXd f(3);
  f << 0.3, -0.1, 0.2;
  const VectorXd k = decision_probabilities(f, DecisionRule{1.0, DecisionMode::Deterministic});
  EXPECT_EQ(k, (VectorXd(3) << 0.0, 1.0, 0.0).finished());
}
