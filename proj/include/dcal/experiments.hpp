#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dcal/calibrate.hpp"
#include "dcal/serialize.hpp"
#include "dcal/synth.hpp"

namespace dcal {

using NamedValues = std::vector<std::pair<std::string, double>>;

struct ExperimentCell {
  std::string name;
  std::uint64_t seed = 0;
  NamedValues params;
  NamedValues metrics;
  std::vector<std::string> labels;

  double metric(const std::string& key) const;
};

struct ExperimentCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentResult {
  std::string id;
  std::uint64_t seed = 0;
  Json params = Json::object();
  std::vector<ExperimentCell> cells;
  NamedValues fits;
  std::vector<ExperimentCheck> checks;
  bool degenerate = false;

  bool passed() const;
  const ExperimentCell& cell(const std::string& name) const;
  double fit(const std::string& key) const;
};

/// Long format: experiment,cell,params,metric,value.
std::string results_csv(const ExperimentResult& r);
Json summary_json(const ExperimentResult& r);

// -- convergence --------------------------------------------------------------

enum class StartPredictor { Planted, Marginal };

struct ConvergenceCellSpec {
  std::string name;
  KernelKind kernel = KernelKind::Min;
  Eigen::Index dim = 1;
  double epsilon = 0.3;
  double r1 = 1.0;
  double r2 = 1.0;
  double shift_norm = 0.3;
  StartPredictor start = StartPredictor::Planted;
  PatchAlgorithm algorithm = PatchAlgorithm::Alg1;
  std::optional<long> max_iters;
};

struct ConvergenceConfig {
  std::vector<ConvergenceCellSpec> cells;
  std::uint64_t seed = 0;
  std::size_t actions = 2;
  double beta = 20.0;
  Eigen::Index audit_batch_size = 1000;
  Eigen::Index heldout_size = 4000;
  std::size_t pool_size = 32;
  Eigen::Index contexts = 4;
  Eigen::Index support = 8;
  double noise = 0.2;
  std::vector<double> sweep_epsilons{0.6, 0.5, 0.4, 0.3};  // ungated sample-count fit
  double sweep_shift = 0.5;
  int threads = 1;
};

std::vector<ConvergenceCellSpec> default_convergence_cells();
ExperimentResult convergence_experiment(const ConvergenceConfig& cfg);

/// Smallest per-iteration margin (pot_t - pot_{t+1}) - (2 eta gap_t - eta^2 R1^2)
/// over a trace; +inf for an empty trace.
double min_decrease_margin(const CalibrationTrace& t, double eta, double r1);

// -- uniform convergence -------------------------------------------------------

struct UniformConvergenceConfig {
  std::vector<Eigen::Index> n_grid{64, 128, 256, 512, 1024, 2048};
  Eigen::Index reference_n = 200000;
  std::size_t resamples = 20;
  std::size_t pairs = 16;
  std::size_t actions = 2;
  double beta = 5.0;
  double slope_min = -0.65;
  double slope_max = -0.35;
  double ci_level = 0.99;
  std::vector<Eigen::Index> dims{5, 50};
  bool zero_losses = false;  // degenerate pool, for validation
  std::uint64_t seed = 0;
  int threads = 1;
};

ExperimentResult uniform_convergence_experiment(const UniformConvergenceConfig& cfg);

/// Per-sample values sum_a (l(a,y) - f_p(x,a,l)) k~_{l'}(x,a); one column per
/// pair. Their column means are the signed empirical gaps.
Eigen::MatrixXd gap_contributions(const Predictor& p,
                                  const std::vector<std::pair<LossFunction, LossFunction>>& pairs,
                                  const Batch& batch, const DecisionRule& rule, int threads = 1);

// -- regret ---------------------------------------------------------------------

struct RegretConfig {
  double epsilon = 0.1;
  double beta = 20.0;
  std::vector<double> beta_sweep{5.0, 20.0, 80.0};
  std::size_t actions = 3;
  std::size_t losses = 16;
  double r1 = 1.0;
  Eigen::Index audit_batch_size = 2000;
  Eigen::Index heldout_size = 4000;
  Eigen::Index eval_size = 20000;
  std::size_t pool_size = 32;
  double delta = 0.01;
  WorldSpec world{WorldKind::Planted, 4, 8, 0.3, 0.2, 0};
  std::uint64_t seed = 0;
  int threads = 1;
};

struct RegretSummary {
  double max_regret = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  bool pairs_ok = true;
  bool smooth_ok = true;
  double worst_smooth_margin = 0.0;  // min over samples of bound - (E_k f - min f)
};

/// Regret over ordered pairs of `losses` for predictor p on `batch`.
RegretSummary regret_check(const Predictor& p, const std::vector<LossFunction>& losses,
                           const Batch& batch, double epsilon, double beta, double r1, double r2,
                           double delta);

ExperimentResult regret_experiment(const RegretConfig& cfg);

// -- distinguishing -------------------------------------------------------------

struct DistinguishingConfig {
  std::vector<Eigen::Index> d_grid{25, 100, 400};
  std::vector<Eigen::Index> n_grid{2, 5, 10, 20};
  double epsilon = 0.1;
  long trials = 1000;
  double ci_level = 0.99;
  Eigen::Index marginal_instances = 10000;
  Eigen::Index marginal_d = 25;
  std::uint64_t seed = 0;
};

ExperimentResult distinguishing_experiment(const DistinguishingConfig& cfg);

}  // namespace dcal
