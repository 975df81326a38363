#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dcal/decision.hpp"
#include "dcal/loss.hpp"
#include "dcal/predictor.hpp"
#include "dcal/samples.hpp"

namespace dcal {

/// Everything about (p, batch) that does not depend on the loss pair:
/// predictor states per distinct context, the union anchor list
/// U = predictor anchors followed by new batch outcomes, and its Gram matrix.
class BatchAnalysis {
 public:
  BatchAnalysis(const Predictor& p, const Batch& batch, int threads = 1);
  BatchAnalysis(Predictor&&, const Batch&, int = 1) = delete;

  const Predictor& predictor() const { return *p_; }
  Eigen::Index size() const { return n_; }
  Eigen::Index num_groups() const { return groups_.num_groups(); }
  const ColumnGroups& groups() const { return groups_; }
  const std::vector<PredictorState>& states() const { return states_; }
  const Eigen::MatrixXd& union_anchors() const { return union_anchors_; }
  const Eigen::MatrixXd& union_gram() const { return union_gram_; }
  Eigen::Index predictor_anchors() const { return pred_anchors_; }
  const std::vector<Eigen::Index>& outcome_index() const { return outcome_index_; }

  /// k(a, g): decision distribution under l' for each distinct context.
  Eigen::MatrixXd probabilities(const LossFunction& lossprime, const DecisionRule& rule) const;

  /// R_a = E[(phi(y) - p(x)) k_a] as coefficients over U, |U| x |A|.
  Eigen::MatrixXd residual_coefficients(const Eigen::MatrixXd& probs) const;
  Eigen::VectorXd residual_norms(const Eigen::MatrixXd& residuals) const;

  /// Signed E[sum_a <r_l(a), phi(y) - p(x)> k_a] for the given residuals.
  double signed_gap(const LossFunction& loss, const Eigen::MatrixXd& residuals) const;

  /// E ||p(x) - phi(y)||^2.
  double potential() const;

 private:
  const Predictor* p_;
  Eigen::Index n_;
  ColumnGroups groups_;
  std::vector<PredictorState> states_;
  Eigen::Index pred_anchors_;
  Eigen::MatrixXd union_anchors_;
  Eigen::MatrixXd union_gram_;
  std::vector<Eigen::Index> outcome_index_;
};

struct AuditOptions {
  double r1 = 1.0;
  DecisionRule rule{};
  int threads = 1;
};

struct AuditReport {
  bool found = false;
  std::optional<LossFunction> witness_loss;
  std::optional<LossFunction> witness_lossprime;
  double empirical_gap = 0.0;
  double threshold = 0.0;
  Eigen::Index n_used = 0;
  std::size_t candidate_pool_size = 0;
};

/// Closed-form maximizer for a fixed l' together with its residuals.
struct Witness {
  LossFunction loss;
  double gap = 0.0;
  Eigen::MatrixXd residuals;   // |U| x |A|
  Eigen::MatrixXd probs;       // |A| x groups
  Eigen::VectorXd norms;       // |A|
};

/// |E[sum_a <r_l(a), phi(y) - p(x)> k~_{l'}(x, a)]|.
double empirical_gap(const Predictor& p, const LossFunction& loss, const LossFunction& lossprime,
                     const Batch& batch, const DecisionRule& rule, int threads = 1);
double empirical_gap(const BatchAnalysis& ba, const LossFunction& loss,
                     const LossFunction& lossprime, const DecisionRule& rule);

/// r*(a) = R1 R_a / ||R_a||, zero when ||R_a|| <= 1e-12.
Witness closed_form_witness(const BatchAnalysis& ba, const LossFunction& lossprime, double r1,
                            const DecisionRule& rule, std::string id = {});
LossFunction closed_form_witness(const Predictor& p, const LossFunction& lossprime,
                                 const Batch& batch, double r1, const DecisionRule& rule);

AuditReport audit(const BatchAnalysis& ba, double epsilon, const std::vector<LossFunction>& pool,
                  const AuditOptions& opts);
AuditReport audit(const Predictor& p, const Batch& batch, double epsilon,
                  const std::vector<LossFunction>& pool, const AuditOptions& opts);

/// max over the pool of the closed-form gap (no threshold).
double decce_estimate(const BatchAnalysis& ba, const std::vector<LossFunction>& pool,
                      const AuditOptions& opts);
double decce_estimate(const Predictor& p, const Batch& batch,
                      const std::vector<LossFunction>& pool, const AuditOptions& opts);

/// `random_count` random norm-R1 losses spanning the batch outcomes, followed
/// by `extra` (earlier witnesses, user losses).
std::vector<LossFunction> build_pool(const Kernel& kernel, std::size_t actions, double r1,
                                     const Batch& batch, std::size_t random_count, Rng& rng,
                                     const std::string& prefix,
                                     const std::vector<LossFunction>& extra = {});

}  // namespace dcal
