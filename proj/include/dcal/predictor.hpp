#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "dcal/kernel.hpp"
#include "dcal/loss.hpp"

namespace dcal {

/// alpha(x) = offset + weights * x over the base anchors. Covers a constant
/// mean (weights = 0) and tabular rules over one-hot contexts.
struct AffineBase {
  Eigen::MatrixXd weights;  // anchors x context dim
  Eigen::VectorXd offset;   // anchors
};

/// alpha(x)_j = sum of normalized Gaussian similarities of x to the training
/// contexts whose outcome is anchor j.
struct NadarayaWatsonBase {
  Eigen::MatrixXd contexts;              // context dim x m
  std::vector<Eigen::Index> anchor_of;   // m entries
  double bandwidth = 1.0;
};

using BaseRule = std::variant<AffineBase, NadarayaWatsonBase>;

enum class PatchAlgorithm { Alg1, Alg2 };

std::string_view to_string(PatchAlgorithm algorithm);
PatchAlgorithm patch_algorithm_from_string(std::string_view name);

/// One calibration update. The increment for a context with decision
/// distribution k is directions * (mixing * k), a span over the first
/// `anchors_after` predictor anchors. alg1 uses mixing = I and directions
/// d_a; alg2 uses mixing = (D + I)^-1 and directions G_a.
struct PatchRecord {
  PatchAlgorithm algorithm = PatchAlgorithm::Alg1;
  LossFunction witness_lossprime;
  std::string witness_loss_id;
  double beta = 1.0;
  double eta = 0.0;
  Eigen::Index anchors_before = 0;
  Eigen::Index anchors_after = 0;
  Eigen::MatrixXd directions;  // anchors_after x |A|
  Eigen::MatrixXd mixing;      // |A| x |A|
  std::string batch_id;

  // Derived on append.
  Eigen::MatrixXd loss_at_anchors;  // |A| x anchors_before
  Eigen::MatrixXd cross;            // anchors_before x |A|, G * directions
  Eigen::MatrixXd direction_gram;   // |A| x |A|, D^T G D
};

/// Coefficients of p(x) over the leading predictor anchors and their squared
/// RKHS norm.
struct PredictorState {
  Eigen::VectorXd alpha;
  double sq_norm = 0.0;
};

/// Base span plus an ordered chain of patches, evaluated exactly through
/// kernel evaluations. All anchors live in one deduplicated dictionary whose
/// Gram matrix is kept incrementally.
class Predictor {
 public:
  Predictor(Kernel kernel, const Eigen::MatrixXd& base_anchors, BaseRule base);

  const Kernel& kernel() const { return kernel_; }
  double radius() const { return kernel_.r2(); }
  Eigen::Index context_dim() const;
  Eigen::Index num_anchors() const { return anchors_.size(); }
  Eigen::Index base_anchor_count() const { return base_count_; }
  Eigen::Index state_length() const { return state_len_; }
  Eigen::Map<const Eigen::MatrixXd> anchors() const { return anchors_.view(); }
  const Eigen::MatrixXd& gram() const { return gram_; }
  const BaseRule& base() const { return base_; }
  const std::vector<PatchRecord>& patches() const { return patches_; }
  const AnchorSet& anchor_set() const { return anchors_; }

  PredictorState base_state(const Eigen::VectorXd& x) const;
  PredictorState state(const Eigen::VectorXd& x) const;
  std::vector<PredictorState> states(const Eigen::MatrixXd& contexts, int threads = 1) const;

  RkhsElement element(const PredictorState& s) const;
  RkhsElement evaluate(const Eigen::VectorXd& x) const;
  /// One element per column; repeated contexts are evaluated once.
  std::vector<RkhsElement> evaluate_batch(const Eigen::MatrixXd& contexts, int threads = 1) const;

  /// Adds outcomes to the anchor dictionary; returns the new anchor count.
  Eigen::Index extend_anchors(const Eigen::MatrixXd& outcomes);

  /// Appends a patch over the first `anchors_after` anchors (all anchors by
  /// default).
  void append_patch(PatchAlgorithm algorithm, LossFunction lossprime, double beta, double eta,
                    Eigen::MatrixXd directions, Eigen::MatrixXd mixing, std::string batch_id,
                    std::string witness_loss_id = {},
                    std::optional<Eigen::Index> anchors_after = std::nullopt);

  /// Column `action` of a patch's directions as an element (d_{t a} for alg1,
  /// G_a for alg2).
  RkhsElement adjustment(std::size_t patch, std::size_t action) const;

 private:
  Eigen::VectorXd base_alpha(const Eigen::VectorXd& x) const;
  void apply_patch(const PatchRecord& p, PredictorState& s) const;

  Kernel kernel_;
  AnchorSet anchors_;
  Eigen::MatrixXd gram_;
  BaseRule base_;
  Eigen::Index base_count_ = 0;
  Eigen::Index state_len_ = 0;
  std::vector<PatchRecord> patches_;
};

/// Scales the state onto the ball of the given radius when outside it.
void project_state(PredictorState& s, double radius);

/// f_p(x, a, l) = <r_l(a), p(x)>.
double loss_estimate(const Predictor& p, const Eigen::VectorXd& x, std::size_t a,
                     const LossFunction& loss);

/// All action estimates at one state: V * alpha with V = loss values at anchors.
Eigen::VectorXd loss_estimates(const Predictor& p, const PredictorState& s,
                               const LossFunction& loss);

// Convenience constructors.
Predictor constant_predictor(const Kernel& kernel, const Eigen::MatrixXd& anchors,
                             const Eigen::VectorXd& coefficients, Eigen::Index context_dim);
Predictor mean_predictor(const Kernel& kernel, const Batch& batch);
Predictor tabular_predictor(const Kernel& kernel, const Eigen::MatrixXd& anchors,
                            const Eigen::MatrixXd& table);
Predictor nadaraya_watson_predictor(const Kernel& kernel, const Batch& training,
                                    double bandwidth);

}  // namespace dcal
