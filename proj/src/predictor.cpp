#include "dcal/predictor.hpp"

#include <cmath>
#include <unordered_map>

#include "dcal/decision.hpp"
#include "dcal/parallel.hpp"

namespace dcal {

std::string_view to_string(PatchAlgorithm algorithm) {
  return algorithm == PatchAlgorithm::Alg1 ? "alg1" : "alg2";
}

PatchAlgorithm patch_algorithm_from_string(std::string_view name) {
  if (name == "alg1") return PatchAlgorithm::Alg1;
  if (name == "alg2") return PatchAlgorithm::Alg2;
  throw InvalidInput("unknown algorithm '" + std::string(name) + "'");
}

void project_state(PredictorState& s, double radius) {
  s.sq_norm = std::max(0.0, s.sq_norm);
  const double n = std::sqrt(s.sq_norm);
  if (n > radius) {
    const double scale = radius / n;
    s.alpha *= scale;
    s.sq_norm *= scale * scale;
  }
}

Predictor::Predictor(Kernel kernel, const Eigen::MatrixXd& base_anchors, BaseRule base)
    : kernel_(std::move(kernel)), anchors_(kernel_.dim()), base_(std::move(base)) {
  if (base_anchors.cols() > 0 && base_anchors.rows() != kernel_.dim())
    throw InvalidInput("base anchor dimension does not match kernel");
  std::vector<Eigen::Index> index(static_cast<std::size_t>(base_anchors.cols()));
  for (Eigen::Index i = 0; i < base_anchors.cols(); ++i) {
    kernel_.require(base_anchors.col(i));
    index[static_cast<std::size_t>(i)] = anchors_.insert(base_anchors.col(i));
  }
  base_count_ = anchors_.size();
  state_len_ = base_count_;

  if (auto* affine = std::get_if<AffineBase>(&base_)) {
    if (affine->weights.rows() != base_anchors.cols() ||
        affine->offset.size() != base_anchors.cols())
      throw InvalidInput("affine base needs one row per base anchor");
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(base_count_, affine->weights.cols());
    Eigen::VectorXd o = Eigen::VectorXd::Zero(base_count_);
    for (Eigen::Index i = 0; i < base_anchors.cols(); ++i) {
      w.row(index[static_cast<std::size_t>(i)]) += affine->weights.row(i);
      o(index[static_cast<std::size_t>(i)]) += affine->offset(i);
    }
    affine->weights = std::move(w);
    affine->offset = std::move(o);
  } else {
    auto& nw = std::get<NadarayaWatsonBase>(base_);
    if (static_cast<Eigen::Index>(nw.anchor_of.size()) != nw.contexts.cols())
      throw InvalidInput("kernel-smoother base needs one anchor per training context");
    if (nw.contexts.cols() == 0) throw InvalidInput("kernel-smoother base needs training data");
    if (!(nw.bandwidth > 0.0)) throw InvalidInput("bandwidth must be positive");
    for (auto& j : nw.anchor_of) {
      if (j < 0 || j >= base_anchors.cols())
        throw InvalidInput("kernel-smoother anchor index out of range");
      j = index[static_cast<std::size_t>(j)];
    }
  }
  const auto a = anchors_.view();
  gram_ = kernel_.gram(a, a);
}

Eigen::Index Predictor::context_dim() const {
  if (const auto* affine = std::get_if<AffineBase>(&base_)) return affine->weights.cols();
  return std::get<NadarayaWatsonBase>(base_).contexts.rows();
}

Eigen::VectorXd Predictor::base_alpha(const Eigen::VectorXd& x) const {
  if (x.size() != context_dim()) throw InvalidInput("context dimension mismatch");
  if (const auto* affine = std::get_if<AffineBase>(&base_))
    return affine->offset + affine->weights * x;
  const auto& nw = std::get<NadarayaWatsonBase>(base_);
  const double h2 = 2.0 * nw.bandwidth * nw.bandwidth;
  Eigen::VectorXd logits = -(nw.contexts.colwise() - x).colwise().squaredNorm().transpose() / h2;
  logits.array() -= logits.maxCoeff();
  Eigen::VectorXd w = logits.array().exp().matrix();
  w /= w.sum();
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(base_count_);
  for (std::size_t i = 0; i < nw.anchor_of.size(); ++i)
    alpha(nw.anchor_of[i]) += w(static_cast<Eigen::Index>(i));
  return alpha;
}

PredictorState Predictor::base_state(const Eigen::VectorXd& x) const {
  PredictorState s;
  s.alpha = base_alpha(x);
  s.sq_norm = s.alpha.dot(gram_.topLeftCorner(base_count_, base_count_) * s.alpha);
  project_state(s, radius());
  return s;
}

void Predictor::apply_patch(const PatchRecord& p, PredictorState& s) const {
  const Eigen::VectorXd f = p.loss_at_anchors * s.alpha;
  const Eigen::VectorXd k = smooth_best_response(f, p.beta);
  const Eigen::VectorXd w = p.mixing * k;
  s.sq_norm += 2.0 * s.alpha.dot(p.cross * w) + w.dot(p.direction_gram * w);
  const Eigen::Index before = s.alpha.size();
  s.alpha.conservativeResize(p.anchors_after);
  s.alpha.tail(p.anchors_after - before).setZero();
  s.alpha.noalias() += p.directions * w;
  project_state(s, radius());
}

PredictorState Predictor::state(const Eigen::VectorXd& x) const {
  PredictorState s = base_state(x);
  for (const auto& p : patches_) apply_patch(p, s);
  return s;
}

std::vector<PredictorState> Predictor::states(const Eigen::MatrixXd& contexts,
                                              int threads) const {
  std::vector<PredictorState> out(static_cast<std::size_t>(contexts.cols()));
  parallel_for(out.size(), threads, [&](std::size_t i) {
    out[i] = state(contexts.col(static_cast<Eigen::Index>(i)));
  });
  return out;
}

RkhsElement Predictor::element(const PredictorState& s) const {
  return RkhsElement(kernel_, anchors().leftCols(s.alpha.size()), s.alpha);
}

RkhsElement Predictor::evaluate(const Eigen::VectorXd& x) const { return element(state(x)); }

std::vector<RkhsElement> Predictor::evaluate_batch(const Eigen::MatrixXd& contexts,
                                                   int threads) const {
  const ColumnGroups groups = group_columns(contexts);
  Eigen::MatrixXd unique(contexts.rows(), groups.num_groups());
  for (Eigen::Index g = 0; g < groups.num_groups(); ++g)
    unique.col(g) = contexts.col(groups.representative[static_cast<std::size_t>(g)]);
  const auto st = states(unique, threads);
  std::vector<RkhsElement> out;
  out.reserve(static_cast<std::size_t>(contexts.cols()));
  for (auto g : groups.group_of) out.push_back(element(st[static_cast<std::size_t>(g)]));
  return out;
}

Eigen::Index Predictor::extend_anchors(const Eigen::MatrixXd& outcomes) {
  const Eigen::Index old = num_anchors();
  for (Eigen::Index i = 0; i < outcomes.cols(); ++i) {
    kernel_.require(outcomes.col(i));
    anchors_.insert(outcomes.col(i));
  }
  const Eigen::Index now = num_anchors();
  if (now > old) {
    const auto all = anchors_.view();
    Eigen::MatrixXd g(now, now);
    g.topLeftCorner(old, old) = gram_;
    const Eigen::MatrixXd fresh = kernel_.gram(all, all.rightCols(now - old));
    g.rightCols(now - old) = fresh;
    g.bottomLeftCorner(now - old, old) = fresh.topRows(old).transpose();
    gram_ = std::move(g);
  }
  return now;
}

void Predictor::append_patch(PatchAlgorithm algorithm, LossFunction lossprime, double beta,
                             double eta, Eigen::MatrixXd directions, Eigen::MatrixXd mixing,
                             std::string batch_id, std::string witness_loss_id,
                             std::optional<Eigen::Index> anchors_after) {
  require_same_kernel(lossprime.kernel(), kernel_);
  const auto actions = static_cast<Eigen::Index>(lossprime.num_actions());
  if (mixing.rows() != actions || mixing.cols() != actions)
    throw InvalidInput("patch mixing matrix must be |A| x |A|");
  const Eigen::Index after = anchors_after.value_or(num_anchors());
  if (after < state_len_ || after > num_anchors())
    throw InvalidInput("patch anchor range is inconsistent with the predictor");
  if (directions.rows() != after || directions.cols() != actions)
    throw InvalidInput("patch directions must be anchors x |A|");
  if (!(beta >= 0.0)) throw InvalidInput("beta must be >= 0");

  PatchRecord rec{algorithm,
                  std::move(lossprime),
                  std::move(witness_loss_id),
                  beta,
                  eta,
                  state_len_,
                  after,
                  std::move(directions),
                  std::move(mixing),
                  std::move(batch_id),
                  {},
                  {},
                  {}};
  const auto all = anchors_.view();
  rec.loss_at_anchors = rec.witness_lossprime.values_at(all.leftCols(rec.anchors_before));
  rec.cross = gram_.topLeftCorner(rec.anchors_before, after) * rec.directions;
  rec.direction_gram =
      rec.directions.transpose() * gram_.topLeftCorner(after, after) * rec.directions;
  state_len_ = after;
  patches_.push_back(std::move(rec));
}

RkhsElement Predictor::adjustment(std::size_t patch, std::size_t action) const {
  const PatchRecord& p = patches_.at(patch);
  return RkhsElement(kernel_, anchors().leftCols(p.anchors_after),
                     p.directions.col(static_cast<Eigen::Index>(action)));
}

double loss_estimate(const Predictor& p, const Eigen::VectorXd& x, std::size_t a,
                     const LossFunction& loss) {
  require_same_kernel(loss.kernel(), p.kernel());
  return inner(loss.coefficient(a), p.evaluate(x));
}

Eigen::VectorXd loss_estimates(const Predictor& p, const PredictorState& s,
                               const LossFunction& loss) {
  require_same_kernel(loss.kernel(), p.kernel());
  return loss.values_at(p.anchors().leftCols(s.alpha.size())) * s.alpha;
}

Predictor constant_predictor(const Kernel& kernel, const Eigen::MatrixXd& anchors,
                             const Eigen::VectorXd& coefficients, Eigen::Index context_dim) {
  AffineBase base{Eigen::MatrixXd::Zero(anchors.cols(), context_dim), coefficients};
  return Predictor(kernel, anchors, std::move(base));
}

Predictor mean_predictor(const Kernel& kernel, const Batch& batch) {
  require_nonempty(batch);
  const Eigen::VectorXd w =
      Eigen::VectorXd::Constant(batch.size(), 1.0 / static_cast<double>(batch.size()));
  return constant_predictor(kernel, batch.y, w, batch.x.rows());
}

Predictor tabular_predictor(const Kernel& kernel, const Eigen::MatrixXd& anchors,
                            const Eigen::MatrixXd& table) {
  AffineBase base{table, Eigen::VectorXd::Zero(anchors.cols())};
  return Predictor(kernel, anchors, std::move(base));
}

Predictor nadaraya_watson_predictor(const Kernel& kernel, const Batch& training,
                                    double bandwidth) {
  require_nonempty(training);
  NadarayaWatsonBase base;
  base.contexts = training.x;
  base.bandwidth = bandwidth;
  base.anchor_of.resize(static_cast<std::size_t>(training.size()));
  for (Eigen::Index i = 0; i < training.size(); ++i)
    base.anchor_of[static_cast<std::size_t>(i)] = i;
  return Predictor(kernel, training.y, std::move(base));
}

}  // namespace dcal
