#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dcal/audit.hpp"
#include "dcal/predictor.hpp"
#include "dcal/samples.hpp"

namespace dcal {

struct CalibConfig {
  double epsilon = 0.1;
  double beta = 1.0;
  double r1 = 1.0;
  double r2 = 1.0;
  std::optional<double> eta;          // default epsilon / (2 R1^2)
  std::optional<long> max_iters;      // default ceil(16 R1^2 R2^2 / epsilon^2)
  std::size_t actions = 2;
  Eigen::Index audit_batch_size = 1000;
  Eigen::Index heldout_size = 4000;
  std::size_t pool_size = 32;
  std::uint64_t seed = 0;
  PatchAlgorithm algorithm = PatchAlgorithm::Alg1;
  std::vector<LossFunction> user_losses;
  double delta = 0.01;  // confidence for the held-out half-width
  int threads = 1;
};

double default_eta(double epsilon, double r1);
long default_max_iters(double epsilon, double r1, double r2);

/// Validates and fills defaults. Throws InvalidInput on out-of-range values.
CalibConfig resolve(CalibConfig cfg);

enum class TerminalStatus { Running, Calibrated, IterationCap, Error };
std::string_view to_string(TerminalStatus status);

struct IterationRecord {
  long iter = 0;
  double gap = 0.0;
  double pot_before = 0.0;
  double pot_after = 0.0;
  std::string witness_id;
  std::string witness_lossprime_id;
  std::string batch_id;
  double ms = 0.0;
};

struct CalibrationTrace {
  std::vector<IterationRecord> records;
  TerminalStatus status = TerminalStatus::Running;
  std::string error;
  long batches_used = 0;
  Eigen::Index samples_used = 0;
  double final_audit_gap = 0.0;
  double heldout_potential_before = 0.0;
  double heldout_potential_after = 0.0;
  double heldout_decce_before = 0.0;
  double heldout_decce_after = 0.0;
  double heldout_halfwidth = 0.0;

  void finish(TerminalStatus s, std::string message = {});
};

struct CalibrationResult {
  Predictor predictor;
  CalibrationTrace trace;
};

/// Source of disjoint batches. Returns nullopt once exhausted.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::optional<Batch> next_batch(Eigen::Index n) = 0;
};

/// Consecutive chunks of a fixed dataset.
class DatasetSource : public SampleSource {
 public:
  explicit DatasetSource(Batch data) : data_(std::move(data)) {}
  std::optional<Batch> next_batch(Eigen::Index n) override;

 private:
  Batch data_;
  Eigen::Index pos_ = 0;
};

/// v scaled onto the ball of radius R2 when outside it.
RkhsElement project(const RkhsElement& v, double r2);

/// Appends an alg1 patch built from the audit's witness pair and returns it.
const PatchRecord& alg1_step(Predictor& p, const BatchAnalysis& ba, const AuditReport& report,
                             const CalibConfig& cfg, const std::string& batch_id);
const PatchRecord& alg1_step(Predictor& p, const AuditReport& report, const Batch& batch,
                             const CalibConfig& cfg);

/// Appends an alg2 patch (lambda = 1) for the given l' and returns it.
const PatchRecord& alg2_step(Predictor& p, const BatchAnalysis& ba, const LossFunction& lossprime,
                             const CalibConfig& cfg, const std::string& batch_id);
const PatchRecord& alg2_step(Predictor& p, const LossFunction& lossprime, const Batch& batch,
                             const CalibConfig& cfg);

/// (D + I)^-1 with D_{aa'} = E[k_a k_a'] over the batch.
Eigen::MatrixXd alg2_mixing(const BatchAnalysis& ba, const Eigen::MatrixXd& probs);

double potential(const Predictor& p, const Batch& batch);

CalibrationResult run_calibration(const Predictor& p0, SampleSource& data, const CalibConfig& cfg);

}  // namespace dcal
