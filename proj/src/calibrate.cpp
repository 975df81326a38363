#include "dcal/calibrate.hpp"

#include <chrono>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "dcal/stats.hpp"

namespace dcal {

double default_eta(double epsilon, double r1) { return epsilon / (2.0 * r1 * r1); }

long default_max_iters(double epsilon, double r1, double r2) {
  const double v = 16.0 * r1 * r1 * r2 * r2 / (epsilon * epsilon);
  return std::max(1L, static_cast<long>(std::ceil(v - 1e-9)));
}

CalibConfig resolve(CalibConfig cfg) {
  if (!(cfg.epsilon > 0.0) || !std::isfinite(cfg.epsilon))
    throw InvalidInput("epsilon must be positive");
  if (!(cfg.beta > 0.0) || !std::isfinite(cfg.beta)) throw InvalidInput("beta must be positive");
  if (!(cfg.r1 > 0.0) || !(cfg.r2 > 0.0)) throw InvalidInput("R1 and R2 must be positive");
  if (!cfg.eta) cfg.eta = default_eta(cfg.epsilon, cfg.r1);
  if (!cfg.max_iters) cfg.max_iters = default_max_iters(cfg.epsilon, cfg.r1, cfg.r2);
  if (!(*cfg.eta > 0.0)) throw InvalidInput("eta must be positive");
  if (*cfg.max_iters < 1) throw InvalidInput("max_iters must be >= 1");
  if (cfg.actions < 1) throw InvalidInput("need at least one action");
  if (cfg.audit_batch_size < 1 || cfg.heldout_size < 1)
    throw InvalidInput("batch sizes must be >= 1");
  if (cfg.pool_size < 1 && cfg.user_losses.empty())
    throw InvalidInput("audit pool would be empty");
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw InvalidInput("delta must lie in (0,1)");
  return cfg;
}

std::string_view to_string(TerminalStatus status) {
  switch (status) {
    case TerminalStatus::Running: return "running";
    case TerminalStatus::Calibrated: return "calibrated";
    case TerminalStatus::IterationCap: return "iteration_cap";
    case TerminalStatus::Error: return "error";
  }
  return "unknown";
}

void CalibrationTrace::finish(TerminalStatus s, std::string message) {
  if (status != TerminalStatus::Running) throw std::logic_error("terminal status already set");
  status = s;
  error = std::move(message);
}

std::optional<Batch> DatasetSource::next_batch(Eigen::Index n) {
  if (pos_ + n > data_.size()) return std::nullopt;
  Batch b = slice(data_, pos_, n);
  pos_ += n;
  return b;
}

RkhsElement project(const RkhsElement& v, double r2) {
  const double n = norm(v);
  if (n <= r2) return v;
  return scaled(v, r2 / n);
}

const PatchRecord& alg1_step(Predictor& p, const BatchAnalysis& ba, const AuditReport& report,
                             const CalibConfig& cfg, const std::string& batch_id) {
  if (!report.found || !report.witness_lossprime)
    throw InvalidInput("alg1 step needs an audit report with a witness");
  const double eta = cfg.eta.value_or(default_eta(cfg.epsilon, cfg.r1));
  const DecisionRule rule{cfg.beta, DecisionMode::Smooth};
  const Witness w = closed_form_witness(ba, *report.witness_lossprime, cfg.r1, rule);
  Eigen::MatrixXd directions = Eigen::MatrixXd::Zero(w.residuals.rows(), w.residuals.cols());
  for (Eigen::Index a = 0; a < w.residuals.cols(); ++a)
    if (w.norms(a) > 1e-12) directions.col(a) = w.residuals.col(a) * (eta * cfg.r1 / w.norms(a));
  const Eigen::Index actions = w.residuals.cols();
  const Eigen::MatrixXd anchors = ba.union_anchors();
  p.extend_anchors(anchors);
  p.append_patch(PatchAlgorithm::Alg1, *report.witness_lossprime, cfg.beta, eta,
                 std::move(directions), Eigen::MatrixXd::Identity(actions, actions), batch_id,
                 report.witness_loss ? report.witness_loss->id() : std::string{},
                 anchors.cols());
  return p.patches().back();
}

const PatchRecord& alg1_step(Predictor& p, const AuditReport& report, const Batch& batch,
                             const CalibConfig& cfg) {
  const BatchAnalysis ba(p, batch, cfg.threads);
  return alg1_step(p, ba, report, cfg, batch.id);
}

Eigen::MatrixXd alg2_mixing(const BatchAnalysis& ba, const Eigen::MatrixXd& probs) {
  const Eigen::Index actions = probs.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(actions, actions);
  for (Eigen::Index g = 0; g < probs.cols(); ++g)
    d.noalias() += static_cast<double>(ba.groups().count[static_cast<std::size_t>(g)]) *
                   probs.col(g) * probs.col(g).transpose();
  d /= static_cast<double>(ba.size());
  const Eigen::MatrixXd reg = d + Eigen::MatrixXd::Identity(actions, actions);
  Eigen::MatrixXd m = reg.ldlt().solve(Eigen::MatrixXd::Identity(actions, actions));
  return 0.5 * (m + m.transpose());
}

const PatchRecord& alg2_step(Predictor& p, const BatchAnalysis& ba, const LossFunction& lossprime,
                             const CalibConfig& cfg, const std::string& batch_id) {
  const DecisionRule rule{cfg.beta, DecisionMode::Smooth};
  const Eigen::MatrixXd probs = ba.probabilities(lossprime, rule);
  Eigen::MatrixXd directions = ba.residual_coefficients(probs);
  Eigen::MatrixXd mixing = alg2_mixing(ba, probs);
  const Eigen::MatrixXd anchors = ba.union_anchors();
  p.extend_anchors(anchors);
  p.append_patch(PatchAlgorithm::Alg2, lossprime, cfg.beta, 0.0, std::move(directions),
                 std::move(mixing), batch_id, {}, anchors.cols());
  return p.patches().back();
}

const PatchRecord& alg2_step(Predictor& p, const LossFunction& lossprime, const Batch& batch,
                             const CalibConfig& cfg) {
  const BatchAnalysis ba(p, batch, cfg.threads);
  return alg2_step(p, ba, lossprime, cfg, batch.id);
}

double potential(const Predictor& p, const Batch& batch) {
  return BatchAnalysis(p, batch).potential();
}

CalibrationResult run_calibration(const Predictor& p0, SampleSource& data,
                                  const CalibConfig& config) {
  const CalibConfig cfg = resolve(config);
  CalibrationResult out{p0, {}};
  Predictor& p = out.predictor;
  CalibrationTrace& trace = out.trace;
  const Kernel& kernel = p.kernel();
  const AuditOptions opts{cfg.r1, DecisionRule{cfg.beta, DecisionMode::Smooth}, cfg.threads};

  std::optional<Batch> heldout = data.next_batch(cfg.heldout_size);
  if (!heldout) {
    trace.finish(TerminalStatus::Error, "data source exhausted before the held-out batch");
    return out;
  }
  heldout->id = "heldout";
  trace.samples_used += heldout->size();

  Rng eval_rng(derive_seed(cfg.seed, 2));
  std::vector<LossFunction> eval_pool =
      build_pool(kernel, cfg.actions, cfg.r1, *heldout, cfg.pool_size, eval_rng, "eval",
                 cfg.user_losses);
  {
    const BatchAnalysis ba(p, *heldout, cfg.threads);
    trace.heldout_potential_before = ba.potential();
    trace.heldout_decce_before = decce_estimate(ba, eval_pool, opts);
  }

  Rng rng(derive_seed(cfg.seed, 1));
  std::vector<LossFunction> witnesses;
  std::set<std::string> witness_ids;
  auto remember = [&](const LossFunction& l) {
    if (witness_ids.insert(l.id()).second) witnesses.push_back(l);
  };

  for (long t = 0;; ++t) {
    std::optional<Batch> batch = data.next_batch(cfg.audit_batch_size);
    if (!batch) {
      trace.finish(TerminalStatus::Error, fmt::format("data source exhausted at iteration {}", t));
      break;
    }
    batch->id = fmt::format("batch-{}", t);
    ++trace.batches_used;
    trace.samples_used += batch->size();

    std::vector<LossFunction> extra = witnesses;
    extra.insert(extra.end(), cfg.user_losses.begin(), cfg.user_losses.end());
    const std::vector<LossFunction> pool = build_pool(
        kernel, cfg.actions, cfg.r1, *batch, cfg.pool_size, rng, fmt::format("it{}", t), extra);

    const BatchAnalysis ba(p, *batch, cfg.threads);
    AuditReport report = audit(ba, cfg.epsilon, pool, opts);
    trace.final_audit_gap = report.empirical_gap;
    if (!report.found) {
      trace.finish(TerminalStatus::Calibrated);
      break;
    }
    if (t >= *cfg.max_iters) {
      trace.finish(TerminalStatus::IterationCap);
      break;
    }

    report.witness_loss = LossFunction(fmt::format("it{}-witness", t),
                                       report.witness_loss->coefficients(), cfg.r1);
    IterationRecord rec;
    rec.iter = t;
    rec.gap = report.empirical_gap;
    rec.pot_before = ba.potential();
    rec.witness_id = report.witness_loss->id();
    rec.witness_lossprime_id = report.witness_lossprime->id();
    rec.batch_id = batch->id;
    const auto start = std::chrono::steady_clock::now();
    if (cfg.algorithm == PatchAlgorithm::Alg1)
      alg1_step(p, ba, report, cfg, batch->id);
    else
      alg2_step(p, ba, *report.witness_lossprime, cfg, batch->id);
    rec.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                 .count();
    rec.pot_after = potential(p, *batch);
    trace.records.push_back(std::move(rec));

    remember(*report.witness_loss);
    remember(*report.witness_lossprime);
  }

  eval_pool.insert(eval_pool.end(), witnesses.begin(), witnesses.end());
  const BatchAnalysis ba(p, *heldout, cfg.threads);
  trace.heldout_potential_after = ba.potential();
  trace.heldout_decce_after = decce_estimate(ba, eval_pool, opts);
  trace.heldout_halfwidth =
      hoeffding_halfwidth(4.0 * cfg.r2 * cfg.r2, heldout->size(), cfg.delta);
  return out;
}

}  // namespace dcal
