#include <gtest/gtest.h>

#include "dcal/calibrate.hpp"
#include "dcal/errors.hpp"
#include "dcal/serialize.hpp"
#include "dcal/synth.hpp"

using namespace dcal;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST(FormatDouble, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0}) EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(Serialize, KernelRoundTrip) {
  for (const Kernel& k : {Kernel::min(1.5), Kernel::linear(3, 2.0), Kernel::exp(2, 3.0)}) {
    const Kernel r = kernel_from_json(to_json(k));
    EXPECT_EQ(r.kind(), k.kind());
    EXPECT_EQ(r.dim(), k.dim());
    EXPECT_EQ(r.r2(), k.r2());
  }
}

TEST(Serialize, LossRoundTrip) {
  const Kernel k = Kernel::exp(2, 2.0);
  Rng rng(1);
  const MatrixXd pts = MatrixXd::Random(2, 6) * 0.5;
  const LossFunction l = random_span_loss(k, 3, 1.0, pts, rng, "l0");
  const LossFunction r = loss_from_json(Json::parse(to_json(l).dump()));
  EXPECT_EQ(r.id(), "l0");
  EXPECT_EQ(r.num_actions(), 3u);
  EXPECT_EQ(r.values_at(pts), l.values_at(pts));
}

TEST(Serialize, PredictorRoundTripAfterPatches) {
  const FiniteWorld w = make_world(Kernel::min(), WorldSpec{WorldKind::Planted, 3, 6, 0.5, 0.2, 2});
  CalibConfig cfg;
  cfg.epsilon = 0.3;
  cfg.beta = 10.0;
  cfg.audit_batch_size = 400;
  cfg.heldout_size = 400;
  WorldSource src(w, 3);
  const CalibrationResult res = run_calibration(planted_predictor(w), src, resolve(cfg));
  ASSERT_GE(res.predictor.patches().size(), 1u);
  const Predictor r = predictor_from_json(Json::parse(to_json(res.predictor).dump()));
  EXPECT_EQ(r.patches().size(), res.predictor.patches().size());
  for (Eigen::Index c = 0; c < 3; ++c) {
    const VectorXd x = VectorXd::Unit(3, c);
    EXPECT_EQ(r.evaluate(x).coefficients(), res.predictor.evaluate(x).coefficients());
  }
  EXPECT_EQ(to_json(r).dump(), to_json(res.predictor).dump());
}

TEST(Serialize, DatasetCsvRoundTrip) {
  const FiniteWorld w = make_world(Kernel::linear(2, 1.0), WorldSpec{WorldKind::Noisy, 3, 5, 0.0, 0.3, 4});
  Rng rng(5);
  const Batch b = w.sample(25, rng);
  const std::string text = dataset_csv(b);
  EXPECT_EQ(text.substr(0, text.find('\n')), "x0,x1,x2,y0,y1");
  const Batch r = parse_dataset_csv(text);
  EXPECT_EQ(r.x, b.x);
  EXPECT_EQ(r.y, b.y);
  EXPECT_THROW(parse_dataset_csv("x0,y0\n1\n"), InvalidInput);
}

TEST(Serialize, TraceCsv) {
  CalibrationTrace t;
  t.records.push_back(IterationRecord{0, 0.5, 0.3, 0.2, "it0-witness", "lp", "batch-0", 12.5});
  const std::string no_time = trace_csv(t, false);
  EXPECT_EQ(no_time.substr(0, no_time.find('\n')), "iter,gap,pot_before,pot_after,witness_id,ms");
  EXPECT_NE(no_time.find("it0-witness,0\n"), std::string::npos);
  EXPECT_NE(trace_csv(t, true).find("12.5"), std::string::npos);
}

TEST(Serialize, ColumnsRoundTrip) {
  const MatrixXd m = MatrixXd::Random(3, 4);
  EXPECT_EQ(columns_from_json(columns_to_json(m), 3), m);
  const MatrixXd empty(2, 0);
  EXPECT_EQ(columns_from_json(columns_to_json(empty), 2).cols(), 0);
}
