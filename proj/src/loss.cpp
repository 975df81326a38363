#include "dcal/loss.hpp"

#include <fmt/format.h>

namespace dcal {

LossFunction::LossFunction(std::string id, std::vector<RkhsElement> per_action,
                           double bound)
    : id_(std::move(id)), per_action_(std::move(per_action)), bound_(bound) {
  if (per_action_.empty()) throw InvalidInput("loss needs at least one action");
  if (!(bound_ > 0.0)) throw InvalidInput("loss norm bound must be positive");
  for (auto& r : per_action_) {
    require_same_kernel(r.kernel(), per_action_.front().kernel());
    const double n = norm(r);
    if (n > bound_ + 1e-9) {
      r = scaled(r, bound_ / n);
      rescaled_ = true;
    }
  }
}

double LossFunction::operator()(std::size_t a, const Eigen::VectorXd& y) const {
  const RkhsElement& r = coefficient(a);
  r.kernel().require(y);
  return r(y);
}

Eigen::MatrixXd LossFunction::values_at(const Eigen::MatrixXd& points) const {
  Eigen::MatrixXd v(static_cast<Eigen::Index>(num_actions()), points.cols());
  for (std::size_t a = 0; a < num_actions(); ++a) {
    const RkhsElement& r = per_action_[a];
    const auto ai = static_cast<Eigen::Index>(a);
    if (r.empty() || points.cols() == 0) {
      v.row(ai).setZero();
      continue;
    }
    v.row(ai) = r.coefficients().transpose() * r.kernel().gram(r.anchors(), points);
  }
  return v;
}

LossFunction random_span_loss(const Kernel& kernel, std::size_t actions, double bound,
                              const Eigen::MatrixXd& outcomes, Rng& rng, std::string id,
                              Eigen::Index span) {
  if (outcomes.cols() == 0) throw InvalidInput("random loss needs outcomes to span");
  std::uniform_int_distribution<Eigen::Index> pick(0, outcomes.cols() - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<RkhsElement> per_action;
  per_action.reserve(actions);
  for (std::size_t a = 0; a < actions; ++a) {
    RkhsElement r(kernel);
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::MatrixXd anchors(kernel.dim(), span);
      Eigen::VectorXd coeffs(span);
      for (Eigen::Index j = 0; j < span; ++j) {
        anchors.col(j) = outcomes.col(pick(rng));
        coeffs(j) = gauss(rng);
      }
      RkhsElement cand(kernel, std::move(anchors), std::move(coeffs));
      const double n = norm(cand);
      if (n > 1e-12) {
        r = scaled(cand, bound / n);
        break;
      }
    }
    per_action.push_back(std::move(r));
  }
  return LossFunction(std::move(id), std::move(per_action), bound);
}

std::vector<LossFunction> random_loss_pool(const Kernel& kernel, std::size_t actions,
                                           double bound, const Eigen::MatrixXd& outcomes,
                                           std::size_t count, Rng& rng,
                                           const std::string& prefix) {
  std::vector<LossFunction> pool;
  pool.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    pool.push_back(random_span_loss(kernel, actions, bound, outcomes, rng,
                                    fmt::format("{}-{}", prefix, i)));
  return pool;
}

}  // namespace dcal
