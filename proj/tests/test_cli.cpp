#include <cstdlib>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "dcal/cli.hpp"
#include "dcal/errors.hpp"

using namespace dcal;
using namespace dcal::cli;
namespace fs = std::filesystem;

namespace {

std::string config_error_key(const Json& doc, Command c, const std::string& exp = {}) {
  try {
    resolve_config(doc, c, exp);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<none>";
}

int run_cli(const std::string& args, const fs::path& out) {
  fs::remove_all(out);
  const std::string cmd = std::string(DCAL_CLI_PATH) + " " + args + " --quiet --out " +
                          out.string() + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path fixture(const std::string& name) { return fs::path(DCAL_FIXTURES) / name; }
fs::path scratch(const std::string& name) { return fs::path(DCAL_SCRATCH) / ("cli-" + name); }

}  // namespace

TEST(ResolveConfig, MinimalCalibrateFillsDefaults) {
  const Json c =
      resolve_config(Json{{"kernel", "min"}, {"epsilon", 0.5}, {"beta", 1}}, Command::Calibrate);
  EXPECT_DOUBLE_EQ(c.at("eta").get<double>(), 0.25);
  EXPECT_EQ(c.at("max_iters").get<long>(), 64);
  EXPECT_DOUBLE_EQ(c.at("R1").get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(c.at("R2").get<double>(), 1.0);
  EXPECT_EQ(c.at("algorithm").get<std::string>(), "alg1");
  const Json e =
      resolve_config(Json{{"kernel", "exp"}, {"dim", 2}, {"epsilon", 0.5}, {"beta", 1}}, Command::Calibrate);
  EXPECT_DOUBLE_EQ(e.at("R2").get<double>(), 2.0);
  EXPECT_EQ(e.at("max_iters").get<long>(), 256);
}

TEST(ResolveConfig, RejectsBadValues) {
  const Json base{{"kernel", "min"}, {"epsilon", 0.5}, {"beta", 1}};
  auto with = [&](const std::string& k, const Json& v) {
    Json d = base;
    d[k] = v;
    return d;
  };
  EXPECT_EQ(config_error_key(with("epsilon", 0), Command::Calibrate), "epsilon");
  EXPECT_EQ(config_error_key(with("epsilon", "big"), Command::Calibrate), "epsilon");
  EXPECT_EQ(config_error_key(with("bogus", 1), Command::Calibrate), "bogus");
  EXPECT_EQ(config_error_key(with("lambda", 2), Command::Calibrate), "lambda");
  EXPECT_EQ(config_error_key(with("R2", 0.5), Command::Calibrate), "R2");
  EXPECT_EQ(config_error_key(with("kernel", "rbf"), Command::Calibrate), "kernel");
  EXPECT_EQ(config_error_key(with("predictor", "file"), Command::Calibrate), "predictor_path");
  EXPECT_EQ(config_error_key(Json{{"epsilon", 0.5}, {"beta", 1}}, Command::Calibrate), "kernel");
  EXPECT_EQ(config_error_key(Json{{"trials", 10}}, Command::Experiment, "distinguishing"), "trials");
  EXPECT_EQ(config_error_key(Json::object(), Command::Experiment, "nope"), "experiment");
}

TEST(Cli, CalibrateFixture) {
  const fs::path out = scratch("calibrate");
  ASSERT_EQ(run_cli("calibrate --config " + fixture("planted_bias.json").string(), out), 0);
  const std::string trace = read_file(out / "trace.csv");
  EXPECT_GE(std::count(trace.begin(), trace.end(), '\n'), 2);
  const Json m = Json::parse(read_file(out / "manifest.json"));
  EXPECT_EQ(m.at("command"), "calibrate");
  EXPECT_TRUE(m.at("gate_passed").get<bool>());
  EXPECT_FALSE(m.contains("timings"));
  for (const auto& f : m.at("outputs")) EXPECT_TRUE(fs::exists(out / f.get<std::string>())) << f;
  for (const char* f : {"trace.csv", "report.json", "predictor.json"}) {
    bool listed = false;
    for (const auto& g : m.at("outputs")) listed = listed || g.get<std::string>() == f;
    EXPECT_TRUE(listed) << f;
  }
}

TEST(Cli, AuditOfExactPredictorFindsNothing) {
  const fs::path out = scratch("audit");
  ASSERT_EQ(run_cli("audit --config " + fixture("audit_exact.json").string(), out), 0);
  const Json r = Json::parse(read_file(out / "report.json"));
  EXPECT_FALSE(r.at("found").get<bool>());
}

TEST(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run_cli("experiment distinguishing --config " +
                        fixture("distinguishing_trials10.json").string(),
                    scratch("trials10")),
            2);
  EXPECT_EQ(run_cli("calibrate --config /nonexistent.json", scratch("missing")), 2);
  EXPECT_EQ(run_cli("frobnicate", scratch("unknown")), 2);
}

TEST(Cli, SynthWritesDataset) {
  const fs::path out = scratch("synth");
  ASSERT_EQ(run_cli("synth --seed 3 --config " + fixture("synth_planted.json").string(), out), 0);
  const Batch b = parse_dataset_csv(read_file(out / "dataset.csv"));
  EXPECT_EQ(b.size(), 200);
  EXPECT_EQ(b.y.rows(), 2);
  const Json m = Json::parse(read_file(out / "manifest.json"));
  EXPECT_EQ(m.at("seed").get<std::uint64_t>(), 3u);
}
