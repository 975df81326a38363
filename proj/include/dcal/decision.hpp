#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "dcal/errors.hpp"

namespace dcal {

enum class DecisionMode { Smooth, Deterministic };

struct DecisionRule {
  double beta = 1.0;
  DecisionMode mode = DecisionMode::Smooth;
};

/// softmax(-beta * f), computed after subtracting the max exponent.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> smooth_best_response(
    const Eigen::MatrixBase<Derived>& fvals, typename Derived::Scalar beta) {
  using Scalar = typename Derived::Scalar;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (fvals.size() == 0) throw InvalidInput("smooth best response needs at least one action");
  if (!(beta >= Scalar(0))) throw InvalidInput("beta must be >= 0");
  Vector z = -beta * fvals;
  z.array() -= z.maxCoeff();
  Vector e = z.array().exp().matrix();
  return e / e.sum();
}

/// argmin, ties resolved toward the lowest index. Returns a 0-based action.
template <typename Derived>
Eigen::Index deterministic_best_response(const Eigen::MatrixBase<Derived>& fvals) {
  if (fvals.size() == 0) throw InvalidInput("best response needs at least one action");
  Eigen::Index best = 0;
  for (Eigen::Index a = 1; a < fvals.size(); ++a)
    if (fvals(a) < fvals(best)) best = a;
  return best;
}

/// Action distribution under either rule (a one-hot vector for deterministic).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> decision_probabilities(
    const Eigen::MatrixBase<Derived>& fvals, const DecisionRule& rule) {
  using Scalar = typename Derived::Scalar;
  if (rule.mode == DecisionMode::Smooth)
    return smooth_best_response(fvals, static_cast<Scalar>(rule.beta));
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> k =
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(fvals.size());
  k(deterministic_best_response(fvals)) = Scalar(1);
  return k;
}

}  // namespace dcal
