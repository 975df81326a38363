#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dcal/cli.hpp"

int main(int argc, char** argv) {
  using dcal::cli::Command;
  CLI::App app{"Decision calibration toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  dcal::cli::RunConfig rc;
  std::string config, out = "dcal_out";
  std::uint64_t seed = 0;
  app.add_option("--config", config, "Config file (JSON)");
  app.add_option("--out", out, "Output directory");
  auto* seed_opt = app.add_option("--seed", seed, "Seed override");
  app.add_option("--threads", rc.threads, "Thread budget");
  app.add_flag("--quiet", rc.quiet, "Suppress the summary line");

  auto* calibrate = app.add_subcommand("calibrate", "Calibrate a predictor");
  auto* audit = app.add_subcommand("audit", "Audit a predictor on a batch");
  auto* synth = app.add_subcommand("synth", "Generate a synthetic world and dataset");
  auto* experiment = app.add_subcommand("experiment", "Run a named experiment");
  experiment
      ->add_option("name", rc.experiment,
                   "convergence | uniform_convergence | regret | distinguishing")
      ->required();
  auto* report = app.add_subcommand("report", "Aggregate earlier run directories");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc_help = app.exit(e);
    return e.get_exit_code() == 0 ? rc_help : dcal::cli::ConfigFailure;
  }
  if (calibrate->parsed()) rc.command = Command::Calibrate;
  if (audit->parsed()) rc.command = Command::Audit;
  if (synth->parsed()) rc.command = Command::Synth;
  if (experiment->parsed()) rc.command = Command::Experiment;
  if (report->parsed()) rc.command = Command::Report;
  rc.config_path = config;
  rc.out_dir = out;
  if (seed_opt->count() > 0) rc.seed = seed;
  return dcal::cli::dispatch(rc);
}
