#include <gtest/gtest.h>

#include "dcal/errors.hpp"
#include "dcal/experiments.hpp"

using namespace dcal;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST(Results, CsvIsLongFormat) {
  ExperimentResult r;
  r.id = "demo";
  ExperimentCell c;
  c.name = "a";
  c.seed = 3;
  c.params = {{"n", 10}};
  c.metrics = {{"gap", 0.5}};
  r.cells.push_back(c);
  r.fits = {{"slope", -0.5}};
  const std::string csv = results_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "experiment,cell,params,metric,value");
  EXPECT_NE(csv.find("demo,a,n=10,gap,0.5"), std::string::npos);
  EXPECT_NE(csv.find("slope,-0.5"), std::string::npos);
  EXPECT_DOUBLE_EQ(r.cell("a").metric("gap"), 0.5);
  EXPECT_THROW(r.cell("b"), InvalidInput);
  EXPECT_FALSE(r.passed());  // no checks
  r.checks.push_back(ExperimentCheck{"ok", true, ""});
  EXPECT_TRUE(r.passed());
  r.degenerate = true;
  EXPECT_FALSE(r.passed());
}

TEST(Convergence, DecreaseMarginOnEmptyTrace) {
  EXPECT_TRUE(std::isinf(min_decrease_margin(CalibrationTrace{}, 0.1, 1.0)));
  CalibrationTrace t;
  t.records.push_back(IterationRecord{0, 0.5, 1.0, 0.9, "", "", "", 0.0});
  // 0.1 - (2 * 0.1 * 0.5 - 0.01)
  EXPECT_NEAR(min_decrease_margin(t, 0.1, 1.0), 0.01, 1e-15);
}

TEST(Convergence, SmallCellPasses) {
  ConvergenceConfig cfg;
  ConvergenceCellSpec cell;
  cell.name = "min";
  cell.epsilon = 0.5;
  cell.shift_norm = 0.5;
  cfg.cells = {cell};
  cfg.sweep_epsilons = {0.6, 0.5, 0.4};
  cfg.seed = 5;
  const ExperimentResult r = convergence_experiment(cfg);
  EXPECT_TRUE(r.passed());
  EXPECT_LE(r.cell("min").metric("iterations"), 64.0);
}

TEST(UniformConvergence, ZeroPoolIsDegenerate) {
  UniformConvergenceConfig cfg;
  cfg.zero_losses = true;
  cfg.n_grid = {32, 64, 128};
  cfg.reference_n = 2000;
  cfg.resamples = 2;
  cfg.dims = {};
  const ExperimentResult r = uniform_convergence_experiment(cfg);
  EXPECT_TRUE(r.degenerate);
  EXPECT_FALSE(r.passed());
}

TEST(UniformConvergence, RejectsShortGridAndSmallReference) {
  UniformConvergenceConfig cfg;
  cfg.n_grid = {32, 64};
  EXPECT_THROW(uniform_convergence_experiment(cfg), InvalidInput);
  cfg.n_grid = {32, 64, 128};
  cfg.reference_n = 1000;
  EXPECT_THROW(uniform_convergence_experiment(cfg), InvalidInput);
}

TEST(UniformConvergence, SelfTestSlopeIsHalf) {
  UniformConvergenceConfig cfg;
  cfg.n_grid = {64, 256, 1024};
  cfg.reference_n = 20000;
  cfg.resamples = 6;
  cfg.pairs = 4;
  cfg.dims = {};
  cfg.seed = 9;
  const ExperimentResult r = uniform_convergence_experiment(cfg);
  EXPECT_NEAR(r.fit("selftest_slope"), -0.5, 1e-12);
}

TEST(GapContributions, MeansAreSignedGaps) {
  const FiniteWorld w = make_world(Kernel::min(), WorldSpec{WorldKind::Planted, 3, 6, 0.3, 0.2, 2});
  Rng rng(2);
  const Batch b = w.sample(200, rng);
  const Predictor p = planted_predictor(w);
  const LossFunction l = random_span_loss(w.kernel, 2, 1.0, w.support, rng, "l");
  const LossFunction lp = random_span_loss(w.kernel, 2, 1.0, w.support, rng, "lp");
  const DecisionRule rule{3.0};
  const MatrixXd c = gap_contributions(p, {{l, lp}}, b, rule);
  ASSERT_EQ(c.cols(), 1);
  EXPECT_EQ(c.rows(), b.size());
  EXPECT_NEAR(std::abs(c.col(0).mean()), empirical_gap(p, l, lp, b, rule), 1e-12);
}

TEST(Regret, SingleActionHasNoRegret) {
  const FiniteWorld w = make_world(Kernel::min(), WorldSpec{WorldKind::Planted, 3, 6, 0.3, 0.2, 3});
  Rng rng(3);
  const Batch b = w.sample(300, rng);
  const auto losses = random_loss_pool(w.kernel, 1, 1.0, w.support, 3, rng, "u");
  const RegretSummary s = regret_check(planted_predictor(w), losses, b, 0.1, 10.0, 1.0, 1.0, 0.01);
  EXPECT_NEAR(s.max_regret, 0.0, 1e-12);
  EXPECT_TRUE(s.pairs_ok);
  EXPECT_TRUE(s.smooth_ok);
}

TEST(Regret, SelfPairIsWithinSlack) {
  const FiniteWorld w = make_world(Kernel::min(), WorldSpec{WorldKind::Planted, 3, 6, 0.0, 0.2, 4});
  Rng rng(4);
  const Batch b = w.sample(2000, rng);
  const auto losses = random_loss_pool(w.kernel, 3, 1.0, w.support, 1, rng, "u");
  const RegretSummary s = regret_check(truth_predictor(w), losses, b, 0.1, 20.0, 1.0, 1.0, 0.01);
  EXPECT_TRUE(s.pairs_ok);
  EXPECT_LE(s.max_regret, s.slack);
}

TEST(Distinguishing, GuardsAndSingleSampleCells) {
  DistinguishingConfig cfg;
  cfg.trials = 99;
  EXPECT_THROW(distinguishing_experiment(cfg), InvalidInput);
  cfg.trials = 200;
  cfg.epsilon = 0.4;
  EXPECT_THROW(distinguishing_experiment(cfg), InvalidInput);
  cfg.epsilon = 0.1;
  cfg.d_grid = {16};
  cfg.n_grid = {1, 2};
  cfg.marginal_instances = 500;
  cfg.seed = 1;
  const ExperimentResult r = distinguishing_experiment(cfg);
  EXPECT_EQ(r.cell("d=16,n=1").metric("gap"), 0.0);
  EXPECT_EQ(r.cell("d=16,n=2").metric("accept_d2"), 200.0);
  EXPECT_NEAR(r.cell("d=16,n=2").metric("oracle_gap"), 1.0 / 32.0, 1e-15);
}
