#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dcal/kernel.hpp"
#include "dcal/samples.hpp"

namespace dcal {

/// Loss l(a, y) = <r(a), phi(y)> with one coefficient element per action.
/// Actions are 0-based. Coefficients whose norm exceeds the declared bound
/// are rescaled to norm exactly `bound` and `rescaled()` reports it.
class LossFunction {
 public:
  LossFunction(std::string id, std::vector<RkhsElement> per_action, double bound);

  const std::string& id() const { return id_; }
  std::size_t num_actions() const { return per_action_.size(); }
  const RkhsElement& coefficient(std::size_t a) const { return per_action_.at(a); }
  const std::vector<RkhsElement>& coefficients() const { return per_action_; }
  double bound() const { return bound_; }
  const Kernel& kernel() const { return per_action_.front().kernel(); }
  bool rescaled() const { return rescaled_; }

  double operator()(std::size_t a, const Eigen::VectorXd& y) const;

  /// V(a, j) = l(a, column j of points), |A| x n.
  Eigen::MatrixXd values_at(const Eigen::MatrixXd& points) const;

 private:
  std::string id_;
  std::vector<RkhsElement> per_action_;
  double bound_;
  bool rescaled_ = false;
};

/// Random loss: per action a span of `span` outcomes drawn from the columns of
/// `outcomes` with Gaussian coefficients, normalized to norm `bound`.
LossFunction random_span_loss(const Kernel& kernel, std::size_t actions, double bound,
                              const Eigen::MatrixXd& outcomes, Rng& rng, std::string id,
                              Eigen::Index span = 4);

std::vector<LossFunction> random_loss_pool(const Kernel& kernel, std::size_t actions,
                                           double bound, const Eigen::MatrixXd& outcomes,
                                           std::size_t count, Rng& rng,
                                           const std::string& prefix);

}  // namespace dcal
