#include "dcal/audit.hpp"

#include <cmath>

#include <fmt/format.h>

#include "dcal/parallel.hpp"

namespace dcal {

BatchAnalysis::BatchAnalysis(const Predictor& p, const Batch& batch, int threads)
    : p_(&p), n_(batch.size()) {
  require_nonempty(batch);
  if (batch.x.rows() != p.context_dim()) throw InvalidInput("context dimension mismatch");
  groups_ = group_columns(batch.x);
  Eigen::MatrixXd unique(batch.x.rows(), groups_.num_groups());
  for (Eigen::Index g = 0; g < groups_.num_groups(); ++g)
    unique.col(g) = batch.x.col(groups_.representative[static_cast<std::size_t>(g)]);
  states_ = p.states(unique, threads);

  AnchorSet u = p.anchor_set();
  pred_anchors_ = p.num_anchors();
  outcome_index_.resize(static_cast<std::size_t>(n_));
  for (Eigen::Index i = 0; i < n_; ++i) {
    p.kernel().require(batch.y.col(i));
    outcome_index_[static_cast<std::size_t>(i)] = u.insert(batch.y.col(i));
  }
  union_anchors_ = u.matrix();
  const Eigen::Index total = u.size();
  const Eigen::Index added = total - pred_anchors_;
  union_gram_.resize(total, total);
  union_gram_.topLeftCorner(pred_anchors_, pred_anchors_) = p.gram();
  if (added > 0) {
    const Eigen::MatrixXd fresh =
        p.kernel().gram(union_anchors_, union_anchors_.rightCols(added));
    union_gram_.rightCols(added) = fresh;
    union_gram_.bottomLeftCorner(added, pred_anchors_) = fresh.topRows(pred_anchors_).transpose();
  }
}

Eigen::MatrixXd BatchAnalysis::probabilities(const LossFunction& lossprime,
                                             const DecisionRule& rule) const {
  require_same_kernel(lossprime.kernel(), p_->kernel());
  const Eigen::Index len = p_->state_length();
  const Eigen::MatrixXd v = lossprime.values_at(union_anchors_.leftCols(len));
  Eigen::MatrixXd probs(static_cast<Eigen::Index>(lossprime.num_actions()), num_groups());
  for (Eigen::Index g = 0; g < num_groups(); ++g)
    probs.col(g) = decision_probabilities(v * states_[static_cast<std::size_t>(g)].alpha, rule);
  return probs;
}

Eigen::MatrixXd BatchAnalysis::residual_coefficients(const Eigen::MatrixXd& probs) const {
  const Eigen::Index len = p_->state_length();
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(union_anchors_.cols(), probs.rows());
  for (Eigen::Index i = 0; i < n_; ++i) {
    const auto si = static_cast<std::size_t>(i);
    r.row(outcome_index_[si]) += probs.col(groups_.group_of[si]).transpose();
  }
  for (Eigen::Index g = 0; g < num_groups(); ++g) {
    const auto sg = static_cast<std::size_t>(g);
    r.topRows(len).noalias() -= static_cast<double>(groups_.count[sg]) * states_[sg].alpha *
                                probs.col(g).transpose();
  }
  return r / static_cast<double>(n_);
}

Eigen::VectorXd BatchAnalysis::residual_norms(const Eigen::MatrixXd& residuals) const {
  Eigen::VectorXd out(residuals.cols());
  for (Eigen::Index a = 0; a < residuals.cols(); ++a)
    out(a) = std::sqrt(std::max(0.0, residuals.col(a).dot(union_gram_ * residuals.col(a))));
  return out;
}

double BatchAnalysis::signed_gap(const LossFunction& loss, const Eigen::MatrixXd& residuals) const {
  require_same_kernel(loss.kernel(), p_->kernel());
  if (static_cast<Eigen::Index>(loss.num_actions()) != residuals.cols())
    throw InvalidInput("loss and decision rule disagree on the number of actions");
  const Eigen::MatrixXd v = loss.values_at(union_anchors_);
  double s = 0.0;
  for (Eigen::Index a = 0; a < residuals.cols(); ++a) s += v.row(a).dot(residuals.col(a));
  return s;
}

double BatchAnalysis::potential() const {
  const Eigen::Index len = p_->state_length();
  const auto glen = union_gram_.topLeftCorner(len, len);
  std::vector<double> sq(static_cast<std::size_t>(num_groups()));
  for (Eigen::Index g = 0; g < num_groups(); ++g) {
    const auto& a = states_[static_cast<std::size_t>(g)].alpha;
    sq[static_cast<std::size_t>(g)] = a.dot(glen * a);
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < n_; ++i) {
    const auto si = static_cast<std::size_t>(i);
    const Eigen::Index j = outcome_index_[si];
    const auto g = static_cast<std::size_t>(groups_.group_of[si]);
    total += union_gram_(j, j) - 2.0 * union_gram_.row(j).head(len).dot(states_[g].alpha) + sq[g];
  }
  return total / static_cast<double>(n_);
}

double empirical_gap(const BatchAnalysis& ba, const LossFunction& loss,
                     const LossFunction& lossprime, const DecisionRule& rule) {
  const Eigen::MatrixXd probs = ba.probabilities(lossprime, rule);
  return std::abs(ba.signed_gap(loss, ba.residual_coefficients(probs)));
}

double empirical_gap(const Predictor& p, const LossFunction& loss, const LossFunction& lossprime,
                     const Batch& batch, const DecisionRule& rule, int threads) {
  return empirical_gap(BatchAnalysis(p, batch, threads), loss, lossprime, rule);
}

Witness closed_form_witness(const BatchAnalysis& ba, const LossFunction& lossprime, double r1,
                            const DecisionRule& rule, std::string id) {
  if (!(r1 > 0.0)) throw InvalidInput("R1 must be positive");
  Eigen::MatrixXd probs = ba.probabilities(lossprime, rule);
  Eigen::MatrixXd res = ba.residual_coefficients(probs);
  Eigen::VectorXd norms = ba.residual_norms(res);
  const Kernel& kernel = ba.predictor().kernel();
  std::vector<RkhsElement> per_action;
  double gap = 0.0;
  for (Eigen::Index a = 0; a < res.cols(); ++a) {
    if (norms(a) <= 1e-12) {
      per_action.emplace_back(kernel);
      continue;
    }
    gap += r1 * norms(a);
    RkhsElement r(kernel, ba.union_anchors(), res.col(a) * (r1 / norms(a)));
    per_action.push_back(compress(r, 0.0));
  }
  if (id.empty()) id = lossprime.id() + "-star";
  return Witness{LossFunction(std::move(id), std::move(per_action), r1), gap, std::move(res),
                 std::move(probs), std::move(norms)};
}

LossFunction closed_form_witness(const Predictor& p, const LossFunction& lossprime,
                                 const Batch& batch, double r1, const DecisionRule& rule) {
  return closed_form_witness(BatchAnalysis(p, batch), lossprime, r1, rule).loss;
}

namespace {

struct PoolResult {
  std::size_t best = 0;
  std::vector<std::optional<Witness>> witnesses;
};

PoolResult scan_pool(const BatchAnalysis& ba, const std::vector<LossFunction>& pool,
                     const AuditOptions& opts) {
  if (pool.empty()) throw InvalidInput("audit needs a nonempty candidate pool");
  PoolResult out;
  out.witnesses.resize(pool.size());
  parallel_for(pool.size(), opts.threads, [&](std::size_t i) {
    out.witnesses[i] = closed_form_witness(ba, pool[i], opts.r1, opts.rule);
  });
  for (std::size_t i = 1; i < pool.size(); ++i)
    if (out.witnesses[i]->gap > out.witnesses[out.best]->gap) out.best = i;
  return out;
}

}  // namespace

AuditReport audit(const BatchAnalysis& ba, double epsilon, const std::vector<LossFunction>& pool,
                  const AuditOptions& opts) {
  if (!(epsilon > 0.0)) throw InvalidInput("epsilon must be positive");
  PoolResult scan = scan_pool(ba, pool, opts);
  AuditReport rep;
  rep.threshold = 0.75 * epsilon;
  rep.n_used = ba.size();
  rep.candidate_pool_size = pool.size();
  rep.empirical_gap = scan.witnesses[scan.best]->gap;
  rep.found = rep.empirical_gap > rep.threshold;
  rep.witness_loss = std::move(scan.witnesses[scan.best]->loss);
  rep.witness_lossprime = pool[scan.best];
  return rep;
}

AuditReport audit(const Predictor& p, const Batch& batch, double epsilon,
                  const std::vector<LossFunction>& pool, const AuditOptions& opts) {
  return audit(BatchAnalysis(p, batch, opts.threads), epsilon, pool, opts);
}

double decce_estimate(const BatchAnalysis& ba, const std::vector<LossFunction>& pool,
                      const AuditOptions& opts) {
  PoolResult scan = scan_pool(ba, pool, opts);
  return scan.witnesses[scan.best]->gap;
}

double decce_estimate(const Predictor& p, const Batch& batch,
                      const std::vector<LossFunction>& pool, const AuditOptions& opts) {
  return decce_estimate(BatchAnalysis(p, batch, opts.threads), pool, opts);
}

std::vector<LossFunction> build_pool(const Kernel& kernel, std::size_t actions, double r1,
                                     const Batch& batch, std::size_t random_count, Rng& rng,
                                     const std::string& prefix,
                                     const std::vector<LossFunction>& extra) {
  require_nonempty(batch);
  std::vector<LossFunction> pool =
      random_loss_pool(kernel, actions, r1, batch.y, random_count, rng, prefix);
  for (const auto& l : extra) {
    if (l.num_actions() != actions)
      throw InvalidInput(fmt::format("loss '{}' has {} actions, expected {}", l.id(),
                                     l.num_actions(), actions));
    pool.push_back(l);
  }
  if (pool.empty()) throw InvalidInput("audit needs a nonempty candidate pool");
  return pool;
}

}  // namespace dcal
